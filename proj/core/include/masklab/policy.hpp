#pragma once

#include <span>
#include <string>
#include <vector>

#include "masklab/common.hpp"
#include "masklab/vocab.hpp"

namespace masklab::policy {

// Tiny autoregressive categorical model: mean-pooled prompt embedding plus
// the last context_tokens response-token embeddings, one tanh hidden layer,
// softmax over the vocabulary. Small enough that analytic gradients are
// cheap to verify against finite differences.
struct PolicyConfig {
  int embed_dim = 16;
  int hidden_dim = 32;
  int context_tokens = 4;
  int max_len = 40;
  double init_scale = 0.1;
};

/// Named offsets into the flat parameter vector.
struct Layout {
  int vocab_size = 0;
  int embed_dim = 0;
  int hidden_dim = 0;
  int context_tokens = 0;
  int max_len = 0;
  size_t emb_off = 0, w1_off = 0, b1_off = 0, w2_off = 0, b2_off = 0;
  size_t total = 0;
  int input_dim = 0;  // embed_dim * (1 + context_tokens)

  bool operator==(const Layout&) const = default;
};

Layout make_layout(int vocab_size, const PolicyConfig& config);

struct PolicyParams {
  Layout layout;
  Vocab vocab;
  std::vector<double> theta;
};

PolicyParams init_params(const Vocab& vocab, const PolicyConfig& config, uint64_t seed);

/// Deep immutable copy used as the frozen reference policy.
PolicyParams snapshot_reference(const PolicyParams& params);

struct Trajectory {
  std::string query_id;
  std::vector<int> tokens;   // includes the end token if one was generated
  int segment_boundary = 0;  // index after the first </think>; 0 = all answer
  double logprob_total = 0.0;
  double logprob_think = 0.0;
  double logprob_answer = 0.0;
};

struct LogProbs {
  double total = 0.0;
  double think = 0.0;
  double answer = 0.0;
};

/// Reusable buffers; callers may share one per thread.
struct Workspace {
  std::vector<double> prompt_mean, x, h, z, probs, dz, dh;
};

/// Index after the first </think> token, or 0 when absent (whole response
/// is the answer segment).
int segment_boundary(const Vocab& vocab, std::span<const int> response);

/// Unnormalized logits for the next token given prompt and the response
/// prefix generated so far. Exposed for tests and likelihood scoring.
void next_token_logits(const PolicyParams& params, std::span<const int> prompt,
                       std::span<const int> prefix, Workspace& ws);

int sample_next_token(const PolicyParams& params, std::span<const int> prompt,
                      std::span<const int> prefix, double temperature, RandomStream& rng,
                      Workspace& ws, bool greedy = false);

/// Autoregressive sampling. Logprobs are of the untempered model regardless
/// of temperature; temperature shapes the draw only. greedy ignores the rng.
Trajectory sample_response(const PolicyParams& params, std::span<const int> prompt,
                           double temperature, RandomStream& rng, Workspace& ws,
                           bool greedy = false);

/// Teacher-forced exact log-likelihood, split at the segment boundary.
LogProbs logprob(const PolicyParams& params, std::span<const int> prompt,
                 std::span<const int> response, Workspace& ws);

void per_token_logprob(const PolicyParams& params, std::span<const int> prompt,
                       std::span<const int> response, Workspace& ws,
                       std::vector<double>& out);

/// grad += scale * d(think_w * logp_think + answer_w * logp_answer)/dtheta.
/// grad must have layout.total entries.
void accumulate_grad_logprob(const PolicyParams& params, std::span<const int> prompt,
                             std::span<const int> response, std::span<double> grad,
                             double scale, Workspace& ws, double think_weight = 1.0,
                             double answer_weight = 1.0);

/// Per-position weights variant; weights.size() == response.size().
void accumulate_grad_weighted(const PolicyParams& params, std::span<const int> prompt,
                              std::span<const int> response,
                              std::span<const double> position_weights,
                              std::span<double> grad, Workspace& ws);

// ---- update helpers --------------------------------------------------------

double l2_norm(std::span<const double> v);

/// Scales v down to max_norm when longer; returns the pre-clip norm.
double clip_norm_inplace(std::span<double> v, double max_norm);

/// theta += step * grad; throws on non-finite values, message includes where.
void apply_step(PolicyParams& params, std::span<const double> grad, double step,
                const std::string& context);

// ---- checkpoints ------------------------------------------------------------

/// Versioned header (magic, layout, vocab) then little-endian f64 parameters.
void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path);

/// Loads and additionally requires the stored vocab to match `expected`
/// byte-for-byte; the error names both vocab hashes.
PolicyParams load_checkpoint(const std::string& path, const Vocab& expected);

uint64_t params_hash(const PolicyParams& params);

}  // namespace masklab::policy
