#include "masklab/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "masklab/text.hpp"

namespace masklab::dataset {

using ordered_json = nlohmann::ordered_json;

std::string record_to_json(const Record& r) {
  ordered_json j;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["gold"] = r.gold;
  j["difficulty"] = std::string(world::difficulty_name(r.difficulty));
  j["posterior"] = r.posterior;
  if (r.think) j["think"] = *r.think;
  return j.dump();
}

Record record_from_json(std::string_view line) {
  ordered_json j = ordered_json::parse(line);
  Record r;
  r.id = j.at("id").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.gold = j.at("gold").get<std::string>();
  r.difficulty = world::difficulty_from_name(j.at("difficulty").get<std::string>());
  r.posterior = j.at("posterior").get<std::vector<double>>();
  if (j.contains("think")) r.think = j.at("think").get<std::string>();
  return r;
}

void write_records(const std::string& path, const std::vector<Record>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("write_records: cannot open " + path);
  for (const auto& r : records) f << record_to_json(r) << "\n";
}

std::vector<Record> read_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("read_records: cannot open " + path);
  std::vector<Record> out;
  std::string line;
  while (std::getline(f, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

void write_scenes(const std::string& path, const std::vector<SceneRecord>& scenes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("write_scenes: cannot open " + path);
  for (const auto& s : scenes) {
    ordered_json j;
    j["id"] = s.id;
    j["family"] = s.family;
    j["cues"] = s.cues;
    j["pos"] = s.pos;
    j["size"] = s.size;
    j["target"] = s.target;
    f << j.dump() << "\n";
  }
}

std::vector<SceneRecord> read_scenes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("read_scenes: cannot open " + path);
  std::vector<SceneRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (text::trim(line).empty()) continue;
    ordered_json j = ordered_json::parse(line);
    SceneRecord s;
    s.id = j.at("id").get<std::string>();
    s.family = j.at("family").get<int>();
    s.cues = j.at("cues").get<std::vector<int>>();
    s.pos = j.at("pos").get<int>();
    s.size = j.at("size").get<int>();
    s.target = j.at("target").get<int>();
    out.push_back(std::move(s));
  }
  return out;
}

world::MaskedQuery rebuild_query(const world::WorldModel& w, const SceneRecord& scene,
                                 const Record& record,
                                 const world::FilterThresholds& thresholds) {
  if (scene.id != record.id)
    throw InputError("rebuild_query: scene/record id mismatch: " + scene.id + " vs " +
                     record.id);
  world::Scene s;
  s.family = scene.family;
  s.cues = scene.cues;
  s.pos = scene.pos;
  s.size = scene.size;
  s.target = scene.target;
  auto q = world::make_masked_query(w, s, thresholds);
  if (!q) throw InputError("rebuild_query: query " + record.id + " fails the filter now");
  q->id = record.id;
  if (text::join(q->prompt_tokens) != record.prompt)
    throw InputError("rebuild_query: prompt mismatch for " + record.id);
  if (q->gold != record.gold)
    throw InputError("rebuild_query: gold mismatch for " + record.id);
  return *q;
}

GenerateResult generate_split(const world::WorldModel& w, const std::string& id_prefix,
                              int attempts, double think_fraction, uint64_t seed,
                              const world::FilterThresholds& thresholds) {
  if (attempts < 0) throw ConfigError("generate_split: attempts must be >= 0");
  GenerateResult out;
  out.attempted = attempts;
  RandomStream rng(mix_seed(seed, "dataset.scenes"));
  for (int i = 0; i < attempts; ++i) {
    world::Scene scene = world::sample_scene(w, rng);
    auto q = world::make_masked_query(w, scene, thresholds);
    if (!q) continue;

    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s%06d", id_prefix.c_str(), out.accepted);
    q->id = idbuf;

    Record r;
    r.id = q->id;
    r.prompt = text::join(q->prompt_tokens);
    r.gold = q->gold;
    r.difficulty = q->difficulty;
    r.posterior = q->posterior;

    // per-id coin so annotation is stable under reordering
    if (think_fraction > 0.0) {
      uint64_t h = mix_seed(seed, {fnv1a64("think"), fnv1a64(r.id)});
      double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      if (u < think_fraction) {
        world::ThinkTrace trace = world::synthesize_think_trace(w, *q);
        r.think = text::join(trace.tokens);
      }
    }

    SceneRecord sr;
    sr.id = r.id;
    sr.family = scene.family;
    sr.cues = scene.cues;
    sr.pos = scene.pos;
    sr.size = scene.size;
    sr.target = scene.target;

    out.records.push_back(std::move(r));
    out.scenes.push_back(std::move(sr));
    out.queries.push_back(std::move(*q));
    ++out.accepted;
  }
  return out;
}

}  // namespace masklab::dataset
