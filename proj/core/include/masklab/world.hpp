#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "masklab/common.hpp"

namespace masklab::world {

enum class Difficulty { Easy, Moderate, Hard };

std::string_view difficulty_name(Difficulty d);
Difficulty difficulty_from_name(std::string_view name);

/// One cue combination a family can emit, with its conditional target law.
struct CueCombo {
  std::vector<int> cues;  // sorted indices into cue_vocab
  double prob = 0.0;      // p(combo | family)
  // p(target | combo, family): parallel arrays, target indices sorted ascending
  std::vector<int> targets;
  std::vector<double> target_probs;
};

struct SceneFamily {
  std::string family_id;
  std::vector<CueCombo> combos;
  std::vector<int> irrelevant;  // objects with zero probability under this family
  // attribute compatibility, K*P*S row-major (object, pos, size); empty = uniform
  std::vector<double> compat;
};

struct WorldConfig {
  int objects = 24;           // K
  int cues = 48;              // M
  int families = 6;
  int positions = 3;          // position bins
  int sizes = 3;              // size bins
  int combos_per_family = 8;
  int max_cues_per_scene = 3;
  double attribute_skew = 0.0;  // 0 = attributes carry no information
};

struct WorldModel {
  WorldConfig config;
  uint64_t seed = 0;
  std::vector<std::string> object_vocab;
  std::vector<std::string> cue_vocab;
  std::vector<SceneFamily> families;
};

struct Scene {
  int family = -1;
  std::vector<int> cues;  // in combo (sorted) order
  int pos = 0;
  int size = 0;
  int target = -1;
};

/// Entropy thresholds in bits; queries above reject_above are filtered out.
struct FilterThresholds {
  double easy_max = 0.5;
  double moderate_max = 1.5;
  double reject_above = 2.5;
};

struct MaskedQuery {
  std::string id;
  Scene scene;
  std::vector<std::string> prompt_tokens;  // CUE:* ... POS:* SIZE:* MASK
  std::string gold;
  Difficulty difficulty = Difficulty::Easy;
  std::vector<double> posterior;  // over object_vocab
  double entropy_bits = 0.0;
};

inline constexpr int kTraceTemplateVersion = 1;

struct ThinkTrace {
  std::vector<std::string> tokens;
  bool counter_oracle = false;  // conclusion (gold) differs from argmax(posterior)
};

// ---- operations ----------------------------------------------------------

/// Deterministic world from (config, seed). Throws ConfigError on bad sizes.
WorldModel build_world(const WorldConfig& config, uint64_t seed);

void validate_world(const WorldModel& world);

Scene sample_scene(const WorldModel& world, RandomStream& rng);

/// Exact Bayes posterior p(object | cues, attributes) by enumerating
/// families. Throws InputError on unknown cue tokens or impossible combos.
std::vector<double> oracle_posterior(const WorldModel& world, std::span<const int> cues,
                                     int pos, int size);
std::vector<double> oracle_posterior(const WorldModel& world,
                                     const std::vector<std::string>& cue_tokens, int pos,
                                     int size);

double entropy_bits(std::span<const double> dist);

/// argmax with lowest-index tie-breaking.
int argmax_index(std::span<const double> dist);

/// nullopt = rejected (posterior too flat for a meaningful query).
std::optional<MaskedQuery> make_masked_query(const WorldModel& world, const Scene& scene,
                                             const FilterThresholds& thresholds = {});

/// Deterministic template rendering of an oracle-grounded reasoning trace.
ThinkTrace synthesize_think_trace(const WorldModel& world, const MaskedQuery& query,
                                  int template_version = kTraceTemplateVersion);

/// Sub-world exposing only the given families (same vocabularies).
WorldModel restrict_world(const WorldModel& world, std::span<const int> family_indices);

// ---- serialization --------------------------------------------------------

std::string world_to_json(const WorldModel& world);
WorldModel world_from_json(std::string_view json_text);
void save_world(const std::string& path, const WorldModel& world);
WorldModel load_world(const std::string& path);

}  // namespace masklab::world
