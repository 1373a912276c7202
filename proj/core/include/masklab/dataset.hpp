#pragma once

#include <optional>
#include <string>
#include <vector>

#include "masklab/world.hpp"

namespace masklab::dataset {

/// One JSONL dataset line: {id, prompt, gold, difficulty, posterior, think?}.
struct Record {
  std::string id;
  std::string prompt;  // space-separated prompt tokens
  std::string gold;
  world::Difficulty difficulty = world::Difficulty::Easy;
  std::vector<double> posterior;
  std::optional<std::string> think;  // inner trace text, tags not included
};

/// Sidecar line carrying the generating scene so queries can be rebuilt
/// exactly: {id, family, cues, pos, size, target}.
struct SceneRecord {
  std::string id;
  int family = -1;
  std::vector<int> cues;
  int pos = 0;
  int size = 0;
  int target = -1;
};

std::string record_to_json(const Record& r);
Record record_from_json(std::string_view line);

void write_records(const std::string& path, const std::vector<Record>& records);
std::vector<Record> read_records(const std::string& path);

void write_scenes(const std::string& path, const std::vector<SceneRecord>& scenes);
std::vector<SceneRecord> read_scenes(const std::string& path);

/// Rebuilds the full query (posterior, difficulty, prompt) from its scene and
/// cross-checks it against the dataset record; mismatches are input errors.
world::MaskedQuery rebuild_query(const world::WorldModel& w, const SceneRecord& scene,
                                 const Record& record,
                                 const world::FilterThresholds& thresholds = {});

struct GenerateResult {
  std::vector<Record> records;
  std::vector<SceneRecord> scenes;
  std::vector<world::MaskedQuery> queries;
  int attempted = 0;
  int accepted = 0;
};

/// Draws `attempts` scenes and keeps the queries that pass the entropy
/// filter. think_fraction of accepted records (chosen by a per-id coin)
/// carry the synthesized reasoning trace.
GenerateResult generate_split(const world::WorldModel& w, const std::string& id_prefix,
                              int attempts, double think_fraction, uint64_t seed,
                              const world::FilterThresholds& thresholds = {});

}  // namespace masklab::dataset
