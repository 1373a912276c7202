#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "masklab/world.hpp"

namespace masklab {

/// Shared token vocabulary covering prompt tokens, tag tokens, think-template
/// tokens, and object tokens. Built deterministically from a world; a world
/// and any of its restricted sub-worlds produce the identical vocabulary.
class Vocab {
 public:
  static Vocab build(const world::WorldModel& w);

  /// Rebuilds a vocabulary from a checkpoint token listing. The listing must
  /// have the structure build() emits (role tokens present, <end> last).
  static Vocab from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_[static_cast<size_t>(id)]; }

  /// Token id, or throws InputError naming the token.
  int require(std::string_view tok) const;
  bool contains(std::string_view tok) const;

  std::vector<int> tokenize(std::span<const std::string> toks) const;
  std::vector<int> tokenize_text(std::string_view space_separated) const;

  /// Joins with single spaces; the end token renders as nothing.
  std::string render(std::span<const int> ids) const;

  uint64_t hash() const;

  int end_token() const { return end_; }
  int mask_token() const { return mask_; }
  int instr_token() const { return instr_; }
  int think_open() const { return think_open_; }
  int think_close() const { return think_close_; }
  int answer_open() const { return answer_open_; }
  int answer_close() const { return answer_close_; }
  /// id of an object token given its object index in the world
  int object_token(int object_index) const { return object_begin_ + object_index; }
  int object_begin() const { return object_begin_; }
  int object_count() const { return object_count_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int end_ = -1, mask_ = -1, instr_ = -1;
  int think_open_ = -1, think_close_ = -1, answer_open_ = -1, answer_close_ = -1;
  int object_begin_ = -1, object_count_ = 0;
};

}  // namespace masklab
