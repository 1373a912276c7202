#include "masklab/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace masklab::world {

using ordered_json = nlohmann::ordered_json;

namespace {

// 64 object nouns; worlds larger than this fall back to generated names.
constexpr const char* kObjectWords[] = {
    "mug",      "kettle",  "spoon",    "fork",    "knife",   "plate",   "bowl",
    "pot",      "pan",     "cup",      "jar",     "lid",     "tray",    "whisk",
    "ladle",    "grater",  "toaster",  "blender", "sponge",  "towel",   "soap",
    "sink",     "stove",   "oven",     "fridge",  "chair",   "table",   "lamp",
    "couch",    "shelf",   "clock",    "vase",    "mirror",  "rug",     "pillow",
    "blanket",  "book",    "pen",      "pencil",  "ruler",   "stapler", "tape",
    "scissors", "folder",  "monitor",  "keyboard", "mouse",  "cable",   "charger",
    "phone",    "tablet",  "camera",   "speaker", "headset", "router",  "printer",
    "desk",     "plant",   "bottle",   "glass",   "bucket",  "broom",   "mop",
    "dustpan"};
constexpr int kObjectWordCount = static_cast<int>(std::size(kObjectWords));

// support sizes and their draw weights; clipped to the family domain size
constexpr int kSupportSizes[] = {1, 2, 3, 4, 6, 8};
constexpr double kSupportWeights[] = {0.30, 0.25, 0.20, 0.15, 0.07, 0.03};

constexpr double kDecayChoices[] = {0.0, 0.7, 1.5, 3.0};

double compat_cell(const SceneFamily& fam, const WorldConfig& cfg, int obj, int pos,
                   int size) {
  if (fam.compat.empty()) return 1.0;
  size_t idx = (static_cast<size_t>(obj) * cfg.positions + pos) * cfg.sizes + size;
  return fam.compat[idx];
}

double compat_row_sum(const SceneFamily& fam, const WorldConfig& cfg, int obj) {
  if (fam.compat.empty()) return static_cast<double>(cfg.positions * cfg.sizes);
  double s = 0.0;
  for (int p = 0; p < cfg.positions; ++p)
    for (int b = 0; b < cfg.sizes; ++b) s += compat_cell(fam, cfg, obj, p, b);
  return s;
}

}  // namespace

std::string_view difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Moderate: return "moderate";
    case Difficulty::Hard: return "hard";
  }
  return "easy";
}

Difficulty difficulty_from_name(std::string_view name) {
  if (name == "easy") return Difficulty::Easy;
  if (name == "moderate") return Difficulty::Moderate;
  if (name == "hard") return Difficulty::Hard;
  throw InputError("unknown difficulty: " + std::string(name));
}

WorldModel build_world(const WorldConfig& config, uint64_t seed) {
  if (config.objects < 4)
    throw ConfigError("world.objects: must be >= 4, got " + std::to_string(config.objects));
  if (config.cues < 8)
    throw ConfigError("world.cues: must be >= 8, got " + std::to_string(config.cues));
  if (config.families < 3)
    throw ConfigError("world.families: must be >= 3, got " +
                      std::to_string(config.families));
  if (config.positions < 1 || config.sizes < 1)
    throw ConfigError("world.positions/world.sizes: must be >= 1");
  if (config.combos_per_family < 1)
    throw ConfigError("world.combos_per_family: must be >= 1");
  if (config.max_cues_per_scene < 1)
    throw ConfigError("world.max_cues_per_scene: must be >= 1");
  if (config.attribute_skew < 0.0)
    throw ConfigError("world.attribute_skew: must be >= 0");

  WorldModel w;
  w.config = config;
  w.seed = seed;

  const int K = config.objects;
  const int M = config.cues;
  const int F = config.families;

  for (int i = 0; i < K; ++i) {
    if (i < kObjectWordCount) {
      w.object_vocab.emplace_back(kObjectWords[i]);
    } else {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "obj%03d", i);
      w.object_vocab.emplace_back(buf);
    }
  }
  for (int i = 0; i < M; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%02d", i);
    w.cue_vocab.emplace_back(buf);
  }

  RandomStream rng(mix_seed(seed, "world.build"));

  const int domain_size = std::clamp(static_cast<int>(std::lround(K * 0.45)), 2, K - 2);
  const int pool_size = std::clamp(2 * M / F, 3, M);

  for (int f = 0; f < F; ++f) {
    SceneFamily fam;
    fam.family_id = "fam" + std::to_string(f);

    std::vector<int> domain = rng.sample_without_replacement(K, domain_size);
    std::vector<int> pool = rng.sample_without_replacement(M, pool_size);

    std::set<std::vector<int>> seen;
    std::vector<double> combo_weights;
    for (int c = 0; c < config.combos_per_family; ++c) {
      int ncues = 1 + rng.uniform_int(config.max_cues_per_scene);
      std::vector<int> picks = rng.sample_without_replacement(pool_size, ncues);
      std::vector<int> cues;
      for (int p : picks) cues.push_back(pool[static_cast<size_t>(p)]);
      std::sort(cues.begin(), cues.end());
      if (!seen.insert(cues).second) continue;  // duplicate combo, drop

      CueCombo combo;
      combo.cues = std::move(cues);

      std::vector<double> size_w(std::begin(kSupportWeights), std::end(kSupportWeights));
      int si = rng.categorical(size_w);
      int support = std::min(kSupportSizes[si], domain_size);
      double decay = kDecayChoices[rng.uniform_int(4)];

      std::vector<int> tpicks = rng.sample_without_replacement(domain_size, support);
      std::vector<std::pair<int, double>> objs;
      double norm = 0.0;
      for (int j = 0; j < support; ++j) {
        double p = std::exp(-decay * j);
        objs.emplace_back(domain[static_cast<size_t>(tpicks[j])], p);
        norm += p;
      }
      std::sort(objs.begin(), objs.end());
      for (auto& [obj, p] : objs) {
        combo.targets.push_back(obj);
        combo.target_probs.push_back(p / norm);
      }

      combo_weights.push_back(0.5 + rng.uniform());
      fam.combos.push_back(std::move(combo));
    }
    if (fam.combos.empty())
      throw ConfigError("world.combos_per_family: produced no distinct cue combos");

    double wsum = 0.0;
    for (double cw : combo_weights) wsum += cw;
    for (size_t c = 0; c < fam.combos.size(); ++c) fam.combos[c].prob = combo_weights[c] / wsum;

    std::set<int> support_union;
    for (const auto& combo : fam.combos)
      support_union.insert(combo.targets.begin(), combo.targets.end());
    for (int o = 0; o < K; ++o)
      if (!support_union.count(o)) fam.irrelevant.push_back(o);

    if (config.attribute_skew > 0.0) {
      fam.compat.resize(static_cast<size_t>(K) * config.positions * config.sizes);
      for (int o = 0; o < K; ++o)
        for (int p = 0; p < config.positions; ++p)
          for (int b = 0; b < config.sizes; ++b) {
            uint64_t h = mix_seed(seed, {fnv1a64("compat"), static_cast<uint64_t>(f),
                                         static_cast<uint64_t>(o), static_cast<uint64_t>(p),
                                         static_cast<uint64_t>(b)});
            double u = 2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
            size_t idx = (static_cast<size_t>(o) * config.positions + p) * config.sizes + b;
            fam.compat[idx] = std::exp(config.attribute_skew * u);
          }
    }

    w.families.push_back(std::move(fam));
  }

  validate_world(w);
  return w;
}

void validate_world(const WorldModel& w) {
  const int K = static_cast<int>(w.object_vocab.size());
  const int M = static_cast<int>(w.cue_vocab.size());
  {
    std::set<std::string> s(w.object_vocab.begin(), w.object_vocab.end());
    if (static_cast<int>(s.size()) != K)
      throw ConfigError("world: object_vocab entries are not unique");
    std::set<std::string> c(w.cue_vocab.begin(), w.cue_vocab.end());
    if (static_cast<int>(c.size()) != M)
      throw ConfigError("world: cue_vocab entries are not unique");
  }
  if (w.families.empty()) throw ConfigError("world: no families");

  for (const auto& fam : w.families) {
    if (fam.combos.empty())
      throw ConfigError("world: family " + fam.family_id + " has no cue combos");
    double combo_sum = 0.0;
    std::set<int> support;
    for (const auto& combo : fam.combos) {
      if (combo.cues.empty())
        throw ConfigError("world: family " + fam.family_id + " has an empty cue combo");
      for (int c : combo.cues)
        if (c < 0 || c >= M)
          throw ConfigError("world: family " + fam.family_id + " cue index out of range");
      combo_sum += combo.prob;
      if (combo.targets.size() != combo.target_probs.size())
        throw ConfigError("world: family " + fam.family_id + " target arrays mismatched");
      double tsum = 0.0;
      for (size_t i = 0; i < combo.targets.size(); ++i) {
        int o = combo.targets[i];
        if (o < 0 || o >= K)
          throw ConfigError("world: family " + fam.family_id + " target index out of range");
        tsum += combo.target_probs[i];
        if (combo.target_probs[i] > 0.0) support.insert(o);
      }
      if (std::abs(tsum - 1.0) > 1e-9)
        throw ConfigError("world: family " + fam.family_id +
                          " target distribution does not sum to 1");
    }
    if (std::abs(combo_sum - 1.0) > 1e-9)
      throw ConfigError("world: family " + fam.family_id +
                        " cue distribution does not sum to 1");
    for (int o : fam.irrelevant)
      if (support.count(o))
        throw ConfigError("world: family " + fam.family_id +
                          " irrelevant_set overlaps target support");
    if (!fam.compat.empty()) {
      size_t want = static_cast<size_t>(K) * w.config.positions * w.config.sizes;
      if (fam.compat.size() != want)
        throw ConfigError("world: family " + fam.family_id + " compat table has wrong size");
      for (double v : fam.compat)
        if (!(v > 0.0) || !std::isfinite(v))
          throw ConfigError("world: family " + fam.family_id + " compat values must be positive");
    }
  }
}

Scene sample_scene(const WorldModel& w, RandomStream& rng) {
  Scene s;
  s.family = rng.uniform_int(static_cast<int>(w.families.size()));
  const SceneFamily& fam = w.families[static_cast<size_t>(s.family)];

  std::vector<double> cw;
  cw.reserve(fam.combos.size());
  for (const auto& combo : fam.combos) cw.push_back(combo.prob);
  const CueCombo& combo = fam.combos[static_cast<size_t>(rng.categorical(cw))];
  s.cues = combo.cues;

  s.target = combo.targets[static_cast<size_t>(rng.categorical(combo.target_probs))];

  if (fam.compat.empty()) {
    s.pos = rng.uniform_int(w.config.positions);
    s.size = rng.uniform_int(w.config.sizes);
  } else {
    std::vector<double> cells(static_cast<size_t>(w.config.positions) * w.config.sizes);
    for (int p = 0; p < w.config.positions; ++p)
      for (int b = 0; b < w.config.sizes; ++b)
        cells[static_cast<size_t>(p) * w.config.sizes + b] =
            compat_cell(fam, w.config, s.target, p, b);
    int cell = rng.categorical(cells);
    s.pos = cell / w.config.sizes;
    s.size = cell % w.config.sizes;
  }
  return s;
}

std::vector<double> oracle_posterior(const WorldModel& w, std::span<const int> cues, int pos,
                                     int size) {
  const int K = static_cast<int>(w.object_vocab.size());
  const int M = static_cast<int>(w.cue_vocab.size());
  for (int c : cues)
    if (c < 0 || c >= M) throw InputError("oracle_posterior: cue index out of range");
  if (pos < 0 || pos >= w.config.positions || size < 0 || size >= w.config.sizes)
    throw InputError("oracle_posterior: attribute bin out of range");

  std::vector<int> sorted(cues.begin(), cues.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> post(static_cast<size_t>(K), 0.0);
  const double family_prior = 1.0 / static_cast<double>(w.families.size());
  double mass = 0.0;
  for (const auto& fam : w.families) {
    for (const auto& combo : fam.combos) {
      if (combo.cues != sorted) continue;
      for (size_t i = 0; i < combo.targets.size(); ++i) {
        int o = combo.targets[i];
        double attr = compat_cell(fam, w.config, o, pos, size) /
                      compat_row_sum(fam, w.config, o);
        double contrib = family_prior * combo.prob * combo.target_probs[i] * attr;
        post[static_cast<size_t>(o)] += contrib;
        mass += contrib;
      }
    }
  }
  if (mass <= 0.0)
    throw InputError("oracle_posterior: cue combination has zero probability in this world");
  for (double& p : post) p /= mass;
  return post;
}

std::vector<double> oracle_posterior(const WorldModel& w,
                                     const std::vector<std::string>& cue_tokens, int pos,
                                     int size) {
  std::vector<int> ids;
  ids.reserve(cue_tokens.size());
  for (const auto& t : cue_tokens) {
    auto it = std::find(w.cue_vocab.begin(), w.cue_vocab.end(), t);
    if (it == w.cue_vocab.end())
      throw InputError("oracle_posterior: unknown cue token: " + t);
    ids.push_back(static_cast<int>(it - w.cue_vocab.begin()));
  }
  return oracle_posterior(w, ids, pos, size);
}

double entropy_bits(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log2(p);
  return h;
}

int argmax_index(std::span<const double> dist) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(dist.size()); ++i)
    if (dist[static_cast<size_t>(i)] > dist[static_cast<size_t>(best)]) best = i;
  return best;
}

std::optional<MaskedQuery> make_masked_query(const WorldModel& w, const Scene& scene,
                                             const FilterThresholds& thresholds) {
  MaskedQuery q;
  q.scene = scene;
  q.posterior = oracle_posterior(w, scene.cues, scene.pos, scene.size);
  q.entropy_bits = entropy_bits(q.posterior);
  if (q.entropy_bits > thresholds.reject_above) return std::nullopt;

  if (q.entropy_bits < thresholds.easy_max)
    q.difficulty = Difficulty::Easy;
  else if (q.entropy_bits < thresholds.moderate_max)
    q.difficulty = Difficulty::Moderate;
  else
    q.difficulty = Difficulty::Hard;

  for (int c : scene.cues) q.prompt_tokens.push_back("CUE:" + w.cue_vocab[static_cast<size_t>(c)]);
  q.prompt_tokens.push_back("POS:" + std::to_string(scene.pos));
  q.prompt_tokens.push_back("SIZE:" + std::to_string(scene.size));
  q.prompt_tokens.push_back("MASK");

  q.gold = w.object_vocab[static_cast<size_t>(scene.target)];
  return q;
}

ThinkTrace synthesize_think_trace(const WorldModel& w, const MaskedQuery& query,
                                  int template_version) {
  if (template_version != kTraceTemplateVersion)
    throw InputError("synthesize_think_trace: unknown template version " +
                     std::to_string(template_version));

  ThinkTrace trace;
  trace.tokens.emplace_back("cues");
  for (int c : query.scene.cues)
    trace.tokens.push_back("CUE:" + w.cue_vocab[static_cast<size_t>(c)]);
  trace.tokens.emplace_back("at");
  trace.tokens.push_back("POS:" + std::to_string(query.scene.pos));
  trace.tokens.push_back("SIZE:" + std::to_string(query.scene.size));

  // top-3 nonzero posterior candidates, ties to the lowest object index
  std::vector<int> order(query.posterior.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return query.posterior[static_cast<size_t>(a)] > query.posterior[static_cast<size_t>(b)];
  });

  trace.tokens.emplace_back("candidates");
  int listed = 0;
  for (int idx : order) {
    double p = query.posterior[static_cast<size_t>(idx)];
    if (p <= 0.0 || listed == 3) break;
    trace.tokens.push_back(w.object_vocab[static_cast<size_t>(idx)]);
    if (p >= 0.8)
      trace.tokens.emplace_back("certain");
    else if (p >= 0.4)
      trace.tokens.emplace_back("likely");
    else if (p >= 0.15)
      trace.tokens.emplace_back("possible");
    else
      trace.tokens.emplace_back("unlikely");
    ++listed;
  }

  trace.tokens.emplace_back("conclusion");
  trace.tokens.push_back(query.gold);

  int am = argmax_index(query.posterior);
  trace.counter_oracle = (w.object_vocab[static_cast<size_t>(am)] != query.gold);
  return trace;
}

WorldModel restrict_world(const WorldModel& w, std::span<const int> family_indices) {
  if (family_indices.empty()) throw InputError("restrict_world: empty family set");
  WorldModel out;
  out.config = w.config;
  out.seed = w.seed;
  out.object_vocab = w.object_vocab;
  out.cue_vocab = w.cue_vocab;
  std::vector<int> sorted(family_indices.begin(), family_indices.end());
  std::sort(sorted.begin(), sorted.end());
  for (int f : sorted) {
    if (f < 0 || f >= static_cast<int>(w.families.size()))
      throw InputError("restrict_world: family index out of range");
    out.families.push_back(w.families[static_cast<size_t>(f)]);
  }
  out.config.families = static_cast<int>(out.families.size());
  return out;
}

// ---- serialization ---------------------------------------------------------

std::string world_to_json(const WorldModel& w) {
  ordered_json j;
  j["config"] = {{"objects", w.config.objects},
                 {"cues", w.config.cues},
                 {"families", w.config.families},
                 {"positions", w.config.positions},
                 {"sizes", w.config.sizes},
                 {"combos_per_family", w.config.combos_per_family},
                 {"max_cues_per_scene", w.config.max_cues_per_scene},
                 {"attribute_skew", w.config.attribute_skew}};
  j["seed"] = w.seed;
  j["object_vocab"] = w.object_vocab;
  j["cue_vocab"] = w.cue_vocab;
  j["families"] = ordered_json::array();
  for (const auto& fam : w.families) {
    ordered_json jf;
    jf["family_id"] = fam.family_id;
    jf["combos"] = ordered_json::array();
    for (const auto& combo : fam.combos) {
      ordered_json jc;
      jc["cues"] = combo.cues;
      jc["prob"] = combo.prob;
      jc["targets"] = combo.targets;
      jc["target_probs"] = combo.target_probs;
      jf["combos"].push_back(std::move(jc));
    }
    jf["irrelevant"] = fam.irrelevant;
    jf["compat"] = fam.compat;
    j["families"].push_back(std::move(jf));
  }
  return j.dump(2) + "\n";
}

WorldModel world_from_json(std::string_view json_text) {
  ordered_json j = ordered_json::parse(json_text);
  WorldModel w;
  const auto& jc = j.at("config");
  w.config.objects = jc.at("objects").get<int>();
  w.config.cues = jc.at("cues").get<int>();
  w.config.families = jc.at("families").get<int>();
  w.config.positions = jc.at("positions").get<int>();
  w.config.sizes = jc.at("sizes").get<int>();
  w.config.combos_per_family = jc.at("combos_per_family").get<int>();
  w.config.max_cues_per_scene = jc.at("max_cues_per_scene").get<int>();
  w.config.attribute_skew = jc.at("attribute_skew").get<double>();
  w.seed = j.at("seed").get<uint64_t>();
  w.object_vocab = j.at("object_vocab").get<std::vector<std::string>>();
  w.cue_vocab = j.at("cue_vocab").get<std::vector<std::string>>();
  for (const auto& jf : j.at("families")) {
    SceneFamily fam;
    fam.family_id = jf.at("family_id").get<std::string>();
    for (const auto& jcm : jf.at("combos")) {
      CueCombo combo;
      combo.cues = jcm.at("cues").get<std::vector<int>>();
      combo.prob = jcm.at("prob").get<double>();
      combo.targets = jcm.at("targets").get<std::vector<int>>();
      combo.target_probs = jcm.at("target_probs").get<std::vector<double>>();
      fam.combos.push_back(std::move(combo));
    }
    fam.irrelevant = jf.at("irrelevant").get<std::vector<int>>();
    fam.compat = jf.at("compat").get<std::vector<double>>();
    w.families.push_back(std::move(fam));
  }
  validate_world(w);
  return w;
}

void save_world(const std::string& path, const WorldModel& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("save_world: cannot open " + path);
  f << world_to_json(w);
}

WorldModel load_world(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("load_world: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return world_from_json(ss.str());
}

}  // namespace masklab::world
