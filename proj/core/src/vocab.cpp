#include "masklab/vocab.hpp"

#include "masklab/reward.hpp"
#include "masklab/text.hpp"

namespace masklab {

namespace {
constexpr const char* kTemplateWords[] = {"cues",    "at",     "candidates", "conclusion",
                                          "certain", "likely", "possible",   "unlikely"};
}

Vocab Vocab::build(const world::WorldModel& w) {
  Vocab v;
  auto add = [&v](const std::string& tok) {
    v.index_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
    return static_cast<int>(v.tokens_.size()) - 1;
  };

  v.mask_ = add("MASK");
  v.instr_ = add("INSTR");
  for (const auto& c : w.cue_vocab) add("CUE:" + c);
  for (int p = 0; p < w.config.positions; ++p) add("POS:" + std::to_string(p));
  for (int s = 0; s < w.config.sizes; ++s) add("SIZE:" + std::to_string(s));
  v.think_open_ = add(std::string(reward::kThinkOpen));
  v.think_close_ = add(std::string(reward::kThinkClose));
  v.answer_open_ = add(std::string(reward::kAnswerOpen));
  v.answer_close_ = add(std::string(reward::kAnswerClose));
  for (const char* t : kTemplateWords) add(t);
  v.object_begin_ = static_cast<int>(v.tokens_.size());
  v.object_count_ = static_cast<int>(w.object_vocab.size());
  for (const auto& o : w.object_vocab) add(o);
  v.end_ = add("<end>");
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (size_t i = 0; i < v.tokens_.size(); ++i)
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      throw InputError("vocab listing contains duplicate token: " + v.tokens_[i]);
  v.mask_ = v.require("MASK");
  v.instr_ = v.require("INSTR");
  v.think_open_ = v.require(std::string(reward::kThinkOpen));
  v.think_close_ = v.require(std::string(reward::kThinkClose));
  v.answer_open_ = v.require(std::string(reward::kAnswerOpen));
  v.answer_close_ = v.require(std::string(reward::kAnswerClose));
  v.end_ = v.require("<end>");
  if (v.end_ != v.size() - 1) throw InputError("vocab listing: <end> must be last");
  // objects sit between the last template word and <end>
  v.object_begin_ = v.require(kTemplateWords[std::size(kTemplateWords) - 1]) + 1;
  v.object_count_ = v.end_ - v.object_begin_;
  if (v.object_count_ < 1) throw InputError("vocab listing: no object tokens");
  return v;
}

int Vocab::require(std::string_view tok) const {
  auto it = index_.find(std::string(tok));
  if (it == index_.end()) throw InputError("unknown token: " + std::string(tok));
  return it->second;
}

bool Vocab::contains(std::string_view tok) const {
  return index_.find(std::string(tok)) != index_.end();
}

std::vector<int> Vocab::tokenize(std::span<const std::string> toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(require(t));
  return out;
}

std::vector<int> Vocab::tokenize_text(std::string_view space_separated) const {
  auto parts = text::split_tokens(space_separated);
  return tokenize(parts);
}

std::string Vocab::render(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == end_) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

uint64_t Vocab::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    h = fnv1a64(t) ^ (h * 0x100000001b3ULL);
  }
  return h;
}

}  // namespace masklab
