#include "tokforge/extension.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "tokforge/error.hpp"
#include "tokforge/unicode.hpp"

namespace tokforge {

namespace {

// Characters of the segments missing from the vocabulary, most frequent
// first, ties by code point.
std::vector<std::string> missing_characters(const TokenizerModel& model, const SegmentCounts& segments) {
  std::map<std::string, std::uint64_t> freq;
  for (const auto& [seg, n] : segments) {
    for (std::size_t pos = 0; pos < seg.size();) {
      const std::size_t len = unicode::char_length(seg, pos);
      const std::string_view ch(seg.data() + pos, len);
      if (!model.find(ch)) freq[std::string(ch)] += n;
      pos += len;
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [ch, n] : ranked) out.push_back(std::move(ch));
  return out;
}

// Atomic units occurring in the segments: bytes in ByteLevel, characters
// otherwise.
std::unordered_set<std::string> corpus_atoms(Mode mode, const SegmentCounts& segments) {
  std::unordered_set<std::string> atoms;
  for (const auto& [seg, n] : segments) {
    for (std::size_t pos = 0; pos < seg.size();) {
      const std::size_t len = mode == Mode::ByteLevel ? 1 : unicode::char_length(seg, pos);
      atoms.emplace(seg.substr(pos, len));
      pos += len;
    }
  }
  return atoms;
}

// Auxiliary vocabulary, either a loaded model or a learner grown on demand.
class AuxSource {
 public:
  AuxSource(const TokenizerModel* loaded, const TokenizerModel& base, const SegmentCounts& segments,
            const TrainerConfig& cfg) {
    if (loaded) {
      model_ = loaded;
      for (const MergeRule& m : loaded->merges()) {
        split_.emplace(m.result, std::make_pair(m.left, m.right));  // first = lowest rank
        merges_.push_back(m);
      }
      return;
    }
    TrainerConfig aux_cfg = cfg;
    aux_cfg.mode = base.mode();
    aux_cfg.normalizer = base.parts().normalizer;
    aux_cfg.pre_tokenizer = base.parts().pre_tokenizer;
    const ModelParts atomic = make_atomic_model(
        base.mode(), base.mode() == Mode::SentencePiece ? corpus_characters(segments) : std::vector<std::string>{},
        aux_cfg);
    owned_.emplace(atomic);
    learner_.emplace(*owned_, segments, aux_cfg);
  }

  // Makes token `i` available; false once the auxiliary vocabulary ends.
  bool reach(std::size_t i) {
    if (model_) return i < model_->vocab_size();
    while (i >= learner_->tokens().size()) {
      const auto m = learner_->step();
      if (!m) return false;
      split_.emplace(m->result, std::make_pair(m->left, m->right));
      merges_.push_back(*m);
    }
    return true;
  }

  const std::string& token(TokenId id) const { return model_ ? model_->token(id) : learner_->tokens()[id]; }

  bool skippable(TokenId id) const {
    const TokenizerModel& m = model_ ? *model_ : *owned_;
    if (id >= m.vocab_size()) return false;
    return m.is_special(id) || m.is_byte_fallback_token(id) || (m.parts().unk_token && *m.parts().unk_token == id);
  }

  const std::pair<TokenId, TokenId>* split(TokenId id) const {
    const auto it = split_.find(id);
    return it == split_.end() ? nullptr : &it->second;
  }

  const std::vector<MergeRule>& merges() const { return merges_; }

 private:
  const TokenizerModel* model_ = nullptr;
  std::optional<TokenizerModel> owned_;
  std::optional<MergeLearner> learner_;
  std::unordered_map<TokenId, std::pair<TokenId, TokenId>> split_;
  std::vector<MergeRule> merges_;
};

}  // namespace

ExtensionResult continued_extend(const TokenizerModel& model, const SegmentCounts& segments, std::size_t n_new,
                                 const TrainerConfig& cfg) {
  ExtensionReport report;
  if (n_new == 0) return {model, report};

  ModelParts parts = model.parts();
  const std::size_t base_size = parts.tokens.size();
  if (parts.mode == Mode::SentencePiece && cfg.character_coverage) {
    for (auto& ch : missing_characters(model, segments)) {
      if (report.chars_added_for_coverage == n_new) break;
      parts.tokens.push_back(std::move(ch));
      ++report.chars_added_for_coverage;
    }
  }

  const TokenizerModel start(parts);
  MergeLearner learner(start, segments, cfg);
  while (learner.tokens().size() - base_size < n_new) {
    if (!learner.step()) {
      report.exhausted = true;
      break;
    }
  }
  parts.tokens = learner.tokens();
  parts.merges.insert(parts.merges.end(), learner.new_merges().begin(), learner.new_merges().end());
  report.added_merges = learner.new_merges().size();
  report.skipped_invalid = learner.skipped_invalid();
  for (auto id = static_cast<TokenId>(base_size); id < parts.tokens.size(); ++id) report.added_tokens.push_back(id);
  return {TokenizerModel(std::move(parts)), std::move(report)};
}

ExtensionResult naive_extend(const TokenizerModel& model, const SegmentCounts& segments, std::size_t n_new,
                             NaiveStrategy strategy, const TrainerConfig& cfg, const TokenizerModel* aux) {
  ExtensionReport report;
  if (n_new == 0) return {model, report};
  if (aux && aux->mode() != model.mode()) {
    throw Error(ErrorCode::InvalidArgument, "auxiliary tokenizer mode differs from the base model");
  }

  ModelParts parts = model.parts();
  const std::size_t base_size = parts.tokens.size();
  std::unordered_map<std::string, TokenId> ids;
  for (TokenId id = 0; id < parts.tokens.size(); ++id) ids.emplace(parts.tokens[id], id);
  const auto atoms = corpus_atoms(model.mode(), segments);

  AuxSource source(aux, model, segments, cfg);
  std::unordered_set<TokenId> added_aux;  // auxiliary ids already added

  // Missing tokens needed to add aux token `t`, operands before products.
  std::vector<TokenId> needed;
  std::unordered_set<TokenId> queued;
  const auto collect = [&](auto&& self, TokenId t) -> bool {
    const std::string& content = source.token(t);
    if (ids.count(content) || queued.count(t)) return true;
    if (const auto* s = source.split(t)) {
      if (!self(self, s->first) || !self(self, s->second)) return false;
    } else if (!atoms.count(content) || source.skippable(t)) {
      return false;
    }
    queued.insert(t);
    needed.push_back(t);
    return true;
  };

  for (std::size_t i = 0; parts.tokens.size() - base_size < n_new; ++i) {
    if (!source.reach(i)) {
      report.exhausted = true;
      break;
    }
    const auto t = static_cast<TokenId>(i);
    if (source.skippable(t) || ids.count(source.token(t))) continue;
    needed.clear();
    queued.clear();
    if (!collect(collect, t)) continue;
    if (needed.size() > n_new - (parts.tokens.size() - base_size)) continue;
    for (TokenId a : needed) {
      const auto id = static_cast<TokenId>(parts.tokens.size());
      parts.tokens.push_back(source.token(a));
      ids.emplace(parts.tokens.back(), id);
      added_aux.insert(a);
      if (strategy == NaiveStrategy::Regen) {
        if (const auto* s = source.split(a)) {
          parts.merges.push_back({ids.at(source.token(s->first)), ids.at(source.token(s->second)), id});
          ++report.added_merges;
        }
      }
    }
  }

  if (strategy == NaiveStrategy::Append) {
    for (const MergeRule& m : source.merges()) {
      if (!added_aux.count(m.result)) continue;
      const auto l = ids.find(source.token(m.left));
      const auto r = ids.find(source.token(m.right));
      if (l == ids.end() || r == ids.end()) continue;
      parts.merges.push_back({l->second, r->second, ids.at(source.token(m.result))});
      ++report.added_merges;
    }
  }

  for (auto id = static_cast<TokenId>(base_size); id < parts.tokens.size(); ++id) report.added_tokens.push_back(id);
  return {TokenizerModel(std::move(parts)), std::move(report)};
}

}  // namespace tokforge
