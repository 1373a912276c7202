#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "masklab/dataset.hpp"
#include "masklab/policy.hpp"

namespace masklab::sft {

/// A supervised target: <think> trace </think> <answer> gold </answer> <end>,
/// tokenized against the shared vocabulary. N counts every target token.
struct SftExample {
  std::string id;
  std::vector<int> prompt;
  std::vector<int> target;
  int length = 0;  // N
};

/// Builds and validates an example; the record must carry a think trace and
/// the rendered target must parse with format_ok and answer == gold.
SftExample make_example(const Vocab& vocab, const dataset::Record& record);

/// Mean negative log-likelihood per target token (teacher forcing).
double sft_loss(const policy::PolicyParams& params, const SftExample& example,
                policy::Workspace& ws);

struct StepConfig {
  double step_size = 0.05;
  double clip_norm = 5.0;
  double answer_weight = 1.0;  // per-token weight on the answer segment
};

/// One descent step on the mean of per-example losses; returns the pre-step
/// batch loss. Non-finite gradients abort naming the offending example.
double sft_step(policy::PolicyParams& params, std::span<const SftExample> batch,
                const StepConfig& config, policy::Workspace& ws);

struct TrainConfig {
  int steps = 1000;
  int batch_size = 16;
  StepConfig step;
  uint64_t seed = 0;
};

struct StepLoss {
  int step = 0;
  double loss = 0.0;
};

/// Seeded minibatch SFT; examples are drawn with replacement per step.
std::vector<StepLoss> train_sft(policy::PolicyParams& params,
                                std::span<const SftExample> examples,
                                const TrainConfig& config,
                                const std::function<void(const StepLoss&)>& on_step = {});

}  // namespace masklab::sft
