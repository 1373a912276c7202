#include "masklab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "masklab/text.hpp"

namespace masklab::policy {

Layout make_layout(int vocab_size, const PolicyConfig& config) {
  if (vocab_size < 2) throw ConfigError("policy: vocab must have at least 2 tokens");
  if (config.embed_dim < 1 || config.hidden_dim < 1 || config.context_tokens < 1 ||
      config.max_len < 2)
    throw ConfigError("policy: embed_dim/hidden_dim/context_tokens/max_len out of range");

  Layout l;
  l.vocab_size = vocab_size;
  l.embed_dim = config.embed_dim;
  l.hidden_dim = config.hidden_dim;
  l.context_tokens = config.context_tokens;
  l.max_len = config.max_len;
  l.input_dim = config.embed_dim * (1 + config.context_tokens);

  size_t off = 0;
  l.emb_off = off;
  off += static_cast<size_t>(vocab_size) * config.embed_dim;
  l.w1_off = off;
  off += static_cast<size_t>(config.hidden_dim) * l.input_dim;
  l.b1_off = off;
  off += static_cast<size_t>(config.hidden_dim);
  l.w2_off = off;
  off += static_cast<size_t>(vocab_size) * config.hidden_dim;
  l.b2_off = off;
  off += static_cast<size_t>(vocab_size);
  l.total = off;
  return l;
}

PolicyParams init_params(const Vocab& vocab, const PolicyConfig& config, uint64_t seed) {
  PolicyParams p;
  p.layout = make_layout(vocab.size(), config);
  p.vocab = vocab;
  p.theta.assign(p.layout.total, 0.0);
  if (config.init_scale != 0.0) {
    RandomStream rng(mix_seed(seed, "policy.init"));
    // weights gaussian, biases zero
    for (size_t i = p.layout.emb_off; i < p.layout.b1_off; ++i)
      p.theta[i] = config.init_scale * rng.normal();
    for (size_t i = p.layout.w2_off; i < p.layout.b2_off; ++i)
      p.theta[i] = config.init_scale * rng.normal();
  }
  return p;
}

PolicyParams snapshot_reference(const PolicyParams& params) { return params; }

int segment_boundary(const Vocab& vocab, std::span<const int> response) {
  for (size_t i = 0; i < response.size(); ++i)
    if (response[i] == vocab.think_close()) return static_cast<int>(i) + 1;
  return 0;
}

namespace {

void ensure_workspace(const Layout& l, Workspace& ws) {
  ws.prompt_mean.resize(static_cast<size_t>(l.embed_dim));
  ws.x.resize(static_cast<size_t>(l.input_dim));
  ws.h.resize(static_cast<size_t>(l.hidden_dim));
  ws.z.resize(static_cast<size_t>(l.vocab_size));
  ws.probs.resize(static_cast<size_t>(l.vocab_size));
  ws.dz.resize(static_cast<size_t>(l.vocab_size));
  ws.dh.resize(static_cast<size_t>(l.hidden_dim));
}

void compute_prompt_mean(const PolicyParams& p, std::span<const int> prompt, Workspace& ws) {
  const Layout& l = p.layout;
  std::fill(ws.prompt_mean.begin(), ws.prompt_mean.end(), 0.0);
  if (prompt.empty()) return;
  for (int id : prompt) {
    if (id < 0 || id >= l.vocab_size) throw InputError("policy: prompt token id out of range");
    const double* row = p.theta.data() + l.emb_off + static_cast<size_t>(id) * l.embed_dim;
    for (int d = 0; d < l.embed_dim; ++d) ws.prompt_mean[static_cast<size_t>(d)] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(prompt.size());
  for (double& v : ws.prompt_mean) v *= inv;
}

// Builds the input vector for position t of `resp` (may be a prefix) and runs
// the forward pass; logits land in ws.z.
void forward_position(const PolicyParams& p, std::span<const int> resp, size_t t,
                      Workspace& ws) {
  const Layout& l = p.layout;
  std::copy(ws.prompt_mean.begin(), ws.prompt_mean.end(), ws.x.begin());
  for (int j = 1; j <= l.context_tokens; ++j) {
    double* dst = ws.x.data() + static_cast<size_t>(j) * l.embed_dim;
    long long src_pos = static_cast<long long>(t) - j;
    if (src_pos >= 0) {
      int id = resp[static_cast<size_t>(src_pos)];
      if (id < 0 || id >= l.vocab_size)
        throw InputError("policy: response token id out of range");
      const double* row = p.theta.data() + l.emb_off + static_cast<size_t>(id) * l.embed_dim;
      std::copy(row, row + l.embed_dim, dst);
    } else {
      std::fill(dst, dst + l.embed_dim, 0.0);  // before the first token: zero context
    }
  }

  const double* w1 = p.theta.data() + l.w1_off;
  const double* b1 = p.theta.data() + l.b1_off;
  for (int i = 0; i < l.hidden_dim; ++i) {
    const double* row = w1 + static_cast<size_t>(i) * l.input_dim;
    double acc = b1[i];
    for (int d = 0; d < l.input_dim; ++d) acc += row[d] * ws.x[static_cast<size_t>(d)];
    ws.h[static_cast<size_t>(i)] = std::tanh(acc);
  }

  const double* w2 = p.theta.data() + l.w2_off;
  const double* b2 = p.theta.data() + l.b2_off;
  for (int v = 0; v < l.vocab_size; ++v) {
    const double* row = w2 + static_cast<size_t>(v) * l.hidden_dim;
    double acc = b2[v];
    for (int i = 0; i < l.hidden_dim; ++i) acc += row[i] * ws.h[static_cast<size_t>(i)];
    ws.z[static_cast<size_t>(v)] = acc;
  }
}

double log_sum_exp(std::span<const double> z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

// softmax of ws.z into ws.probs; returns logsumexp for logprob reuse
double softmax_inplace(Workspace& ws) {
  double lse = log_sum_exp(ws.z);
  for (size_t i = 0; i < ws.z.size(); ++i) ws.probs[i] = std::exp(ws.z[i] - lse);
  return lse;
}

}  // namespace

void next_token_logits(const PolicyParams& params, std::span<const int> prompt,
                       std::span<const int> prefix, Workspace& ws) {
  ensure_workspace(params.layout, ws);
  compute_prompt_mean(params, prompt, ws);
  forward_position(params, prefix, prefix.size(), ws);
}

int sample_next_token(const PolicyParams& params, std::span<const int> prompt,
                      std::span<const int> prefix, double temperature, RandomStream& rng,
                      Workspace& ws, bool greedy) {
  next_token_logits(params, prompt, prefix, ws);
  if (greedy) {
    int best = 0;
    for (int v = 1; v < params.layout.vocab_size; ++v)
      if (ws.z[static_cast<size_t>(v)] > ws.z[static_cast<size_t>(best)]) best = v;
    return best;
  }
  if (!(temperature > 0.0)) throw InputError("sample_next_token: temperature must be > 0");
  // tempered softmax for the draw only
  double m = *std::max_element(ws.z.begin(), ws.z.end());
  for (size_t v = 0; v < ws.probs.size(); ++v)
    ws.probs[v] = std::exp((ws.z[v] - m) / temperature);
  return rng.categorical(ws.probs);
}

Trajectory sample_response(const PolicyParams& params, std::span<const int> prompt,
                           double temperature, RandomStream& rng, Workspace& ws,
                           bool greedy) {
  if (!greedy && !(temperature > 0.0))
    throw InputError("sample_response: temperature must be > 0 (or use greedy)");
  const Layout& l = params.layout;
  ensure_workspace(l, ws);
  compute_prompt_mean(params, prompt, ws);

  Trajectory traj;
  traj.tokens.reserve(static_cast<size_t>(l.max_len));
  static thread_local std::vector<double> token_lp;
  token_lp.clear();
  for (int t = 0; t < l.max_len; ++t) {
    forward_position(params, traj.tokens, traj.tokens.size(), ws);
    int tok;
    if (greedy) {
      tok = 0;
      for (int v = 1; v < l.vocab_size; ++v)
        if (ws.z[static_cast<size_t>(v)] > ws.z[static_cast<size_t>(tok)]) tok = v;
    } else {
      double m = *std::max_element(ws.z.begin(), ws.z.end());
      for (size_t v = 0; v < ws.probs.size(); ++v)
        ws.probs[v] = std::exp((ws.z[v] - m) / temperature);
      tok = rng.categorical(ws.probs);
    }
    // logprob of the untempered model, whatever shaped the draw
    token_lp.push_back(ws.z[static_cast<size_t>(tok)] - log_sum_exp(ws.z));
    traj.tokens.push_back(tok);
    if (tok == params.vocab.end_token()) break;
  }

  traj.segment_boundary = segment_boundary(params.vocab, traj.tokens);
  for (size_t t = 0; t < token_lp.size(); ++t) {
    if (static_cast<int>(t) < traj.segment_boundary)
      traj.logprob_think += token_lp[t];
    else
      traj.logprob_answer += token_lp[t];
  }
  traj.logprob_total = traj.logprob_think + traj.logprob_answer;
  return traj;
}

LogProbs logprob(const PolicyParams& params, std::span<const int> prompt,
                 std::span<const int> response, Workspace& ws) {
  const Layout& l = params.layout;
  ensure_workspace(l, ws);
  compute_prompt_mean(params, prompt, ws);

  const int boundary = segment_boundary(params.vocab, response);
  LogProbs out;
  for (size_t t = 0; t < response.size(); ++t) {
    int tok = response[t];
    if (tok < 0 || tok >= l.vocab_size)
      throw InputError("logprob: response token id out of range");
    forward_position(params, response, t, ws);
    double lp = ws.z[static_cast<size_t>(tok)] - log_sum_exp(ws.z);
    if (static_cast<int>(t) < boundary)
      out.think += lp;
    else
      out.answer += lp;
  }
  out.total = out.think + out.answer;
  return out;
}

void per_token_logprob(const PolicyParams& params, std::span<const int> prompt,
                       std::span<const int> response, Workspace& ws,
                       std::vector<double>& out) {
  const Layout& l = params.layout;
  ensure_workspace(l, ws);
  compute_prompt_mean(params, prompt, ws);
  out.resize(response.size());
  for (size_t t = 0; t < response.size(); ++t) {
    forward_position(params, response, t, ws);
    out[t] = ws.z[static_cast<size_t>(response[t])] - log_sum_exp(ws.z);
  }
}

namespace {

void backward_position(const PolicyParams& p, std::span<const int> resp, size_t t,
                       double weight, std::span<double> grad, Workspace& ws,
                       std::span<const int> prompt) {
  const Layout& l = p.layout;
  // forward (fills x, h, z)
  forward_position(p, resp, t, ws);
  softmax_inplace(ws);

  const int target = resp[t];
  // dz = weight * (onehot - probs)
  for (int v = 0; v < l.vocab_size; ++v)
    ws.dz[static_cast<size_t>(v)] = weight * ((v == target ? 1.0 : 0.0) - ws.probs[static_cast<size_t>(v)]);

  double* gw2 = grad.data() + l.w2_off;
  double* gb2 = grad.data() + l.b2_off;
  const double* w2 = p.theta.data() + l.w2_off;
  std::fill(ws.dh.begin(), ws.dh.end(), 0.0);
  for (int v = 0; v < l.vocab_size; ++v) {
    const double dzv = ws.dz[static_cast<size_t>(v)];
    if (dzv == 0.0) continue;
    double* grow = gw2 + static_cast<size_t>(v) * l.hidden_dim;
    const double* wrow = w2 + static_cast<size_t>(v) * l.hidden_dim;
    for (int i = 0; i < l.hidden_dim; ++i) {
      grow[i] += dzv * ws.h[static_cast<size_t>(i)];
      ws.dh[static_cast<size_t>(i)] += dzv * wrow[i];
    }
    gb2[v] += dzv;
  }

  // through tanh
  for (int i = 0; i < l.hidden_dim; ++i) {
    double hi = ws.h[static_cast<size_t>(i)];
    ws.dh[static_cast<size_t>(i)] *= (1.0 - hi * hi);
  }

  double* gw1 = grad.data() + l.w1_off;
  double* gb1 = grad.data() + l.b1_off;
  const double* w1 = p.theta.data() + l.w1_off;
  // dW1 += dh x^T ; db1 += dh ; dx = W1^T dh (reuse ws.x as dx accumulator input copy)
  // compute dx into a stack buffer to avoid clobbering x
  static thread_local std::vector<double> dx;
  dx.assign(static_cast<size_t>(l.input_dim), 0.0);
  for (int i = 0; i < l.hidden_dim; ++i) {
    const double dhi = ws.dh[static_cast<size_t>(i)];
    if (dhi == 0.0) continue;
    double* grow = gw1 + static_cast<size_t>(i) * l.input_dim;
    const double* wrow = w1 + static_cast<size_t>(i) * l.input_dim;
    for (int d = 0; d < l.input_dim; ++d) {
      grow[d] += dhi * ws.x[static_cast<size_t>(d)];
      dx[static_cast<size_t>(d)] += dhi * wrow[d];
    }
    gb1[i] += dhi;
  }

  // scatter dx into embedding rows: prompt mean part then context slots
  double* gemb = grad.data() + l.emb_off;
  if (!prompt.empty()) {
    const double inv = 1.0 / static_cast<double>(prompt.size());
    for (int id : prompt) {
      double* grow = gemb + static_cast<size_t>(id) * l.embed_dim;
      for (int d = 0; d < l.embed_dim; ++d) grow[d] += inv * dx[static_cast<size_t>(d)];
    }
  }
  for (int j = 1; j <= l.context_tokens; ++j) {
    long long src_pos = static_cast<long long>(t) - j;
    if (src_pos < 0) continue;
    int id = resp[static_cast<size_t>(src_pos)];
    double* grow = gemb + static_cast<size_t>(id) * l.embed_dim;
    const double* dslice = dx.data() + static_cast<size_t>(j) * l.embed_dim;
    for (int d = 0; d < l.embed_dim; ++d) grow[d] += dslice[d];
  }
}

}  // namespace

void accumulate_grad_weighted(const PolicyParams& params, std::span<const int> prompt,
                              std::span<const int> response,
                              std::span<const double> position_weights,
                              std::span<double> grad, Workspace& ws) {
  if (position_weights.size() != response.size())
    throw InputError("accumulate_grad_weighted: weights/response size mismatch");
  if (grad.size() != params.layout.total)
    throw InputError("accumulate_grad_weighted: grad vector has wrong size");
  ensure_workspace(params.layout, ws);
  compute_prompt_mean(params, prompt, ws);
  for (size_t t = 0; t < response.size(); ++t) {
    if (response[t] < 0 || response[t] >= params.layout.vocab_size)
      throw InputError("accumulate_grad_weighted: response token id out of range");
    if (position_weights[t] == 0.0) continue;
    backward_position(params, response, t, position_weights[t], grad, ws, prompt);
  }
}

void accumulate_grad_logprob(const PolicyParams& params, std::span<const int> prompt,
                             std::span<const int> response, std::span<double> grad,
                             double scale, Workspace& ws, double think_weight,
                             double answer_weight) {
  const int boundary = segment_boundary(params.vocab, response);
  static thread_local std::vector<double> weights;
  weights.resize(response.size());
  for (size_t t = 0; t < response.size(); ++t)
    weights[t] = scale * (static_cast<int>(t) < boundary ? think_weight : answer_weight);
  accumulate_grad_weighted(params, prompt, response, weights, grad, ws);
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double clip_norm_inplace(std::span<double> v, double max_norm) {
  double n = l2_norm(v);
  if (max_norm > 0.0 && n > max_norm) {
    double scale = max_norm / n;
    for (double& x : v) x *= scale;
  }
  return n;
}

void apply_step(PolicyParams& params, std::span<const double> grad, double step,
                const std::string& context) {
  if (grad.size() != params.layout.total)
    throw InputError("apply_step: grad vector has wrong size");
  for (double g : grad)
    if (!std::isfinite(g)) throw InputError("apply_step: non-finite gradient in " + context);
  for (size_t i = 0; i < grad.size(); ++i) params.theta[i] += step * grad[i];
  for (double t : params.theta)
    if (!std::isfinite(t)) throw InputError("apply_step: non-finite parameter after " + context);
}

// ---- checkpoints -------------------------------------------------------------

namespace {
constexpr char kMagic[] = "MASKLAB-CKPT 1";

void store_le64(unsigned char* dst, uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}
uint64_t load_le64(const unsigned char* src) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(src[i]) << (8 * i);
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("save_checkpoint: cannot open " + path);
  const Layout& l = params.layout;
  f << kMagic << "\n";
  f << "layout embed=" << l.embed_dim << " hidden=" << l.hidden_dim
    << " context=" << l.context_tokens << " maxlen=" << l.max_len << " vocab=" << l.vocab_size
    << " params=" << l.total << "\n";
  f << "vocab";
  for (const auto& t : params.vocab.tokens()) f << ' ' << t;
  f << "\nparams\n";
  std::vector<unsigned char> buf(params.theta.size() * 8);
  for (size_t i = 0; i < params.theta.size(); ++i) {
    uint64_t bits;
    std::memcpy(&bits, &params.theta[i], 8);
    store_le64(buf.data() + i * 8, bits);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("load_checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kMagic)
    throw InputError("load_checkpoint: bad magic in " + path);

  if (!std::getline(f, line)) throw InputError("load_checkpoint: missing layout line");
  PolicyConfig cfg;
  int vocab_size = 0;
  size_t total = 0;
  {
    unsigned long long tot = 0;
    if (std::sscanf(line.c_str(), "layout embed=%d hidden=%d context=%d maxlen=%d vocab=%d params=%llu",
                    &cfg.embed_dim, &cfg.hidden_dim, &cfg.context_tokens, &cfg.max_len,
                    &vocab_size, &tot) != 6)
      throw InputError("load_checkpoint: malformed layout line");
    total = static_cast<size_t>(tot);
  }

  if (!std::getline(f, line) || line.rfind("vocab", 0) != 0)
    throw InputError("load_checkpoint: missing vocab line");
  std::vector<std::string> tokens = text::split_tokens(line.substr(5));
  if (static_cast<int>(tokens.size()) != vocab_size)
    throw InputError("load_checkpoint: vocab token count mismatch");

  if (!std::getline(f, line) || line != "params")
    throw InputError("load_checkpoint: missing params marker");

  std::vector<unsigned char> buf(total * 8);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw InputError("load_checkpoint: truncated parameter block");

  PolicyParams p;
  p.layout = make_layout(vocab_size, cfg);
  if (p.layout.total != total)
    throw InputError("load_checkpoint: parameter count does not match layout");
  p.vocab = Vocab::from_tokens(tokens);
  p.theta.resize(total);
  for (size_t i = 0; i < total; ++i) {
    uint64_t bits = load_le64(buf.data() + i * 8);
    std::memcpy(&p.theta[i], &bits, 8);
  }
  return p;
}

PolicyParams load_checkpoint(const std::string& path, const Vocab& expected) {
  PolicyParams p = load_checkpoint(path);
  if (p.vocab.tokens() != expected.tokens())
    throw InputError("load_checkpoint: vocab mismatch: checkpoint vocab hash " +
                     hex64(p.vocab.hash()) + " != expected vocab hash " +
                     hex64(expected.hash()));
  return p;
}

uint64_t params_hash(const PolicyParams& params) {
  return fnv1a64(params.theta.data(), params.theta.size() * sizeof(double));
}

}  // namespace masklab::policy
