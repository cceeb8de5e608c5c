#include "tokforge/trainer.hpp"

#include <algorithm>
#include <set>

#include "tokforge/error.hpp"
#include "tokforge/parallel.hpp"
#include "tokforge/unicode.hpp"

namespace tokforge {

TrainerConfig TrainerConfig::defaults(Mode mode) {
  TrainerConfig cfg;
  cfg.mode = mode;
  cfg.max_token_length = default_max_token_length(mode);
  return cfg;
}

TrainerConfig TrainerConfig::for_model(const TokenizerModel& model) {
  TrainerConfig cfg;
  cfg.mode = model.mode();
  cfg.max_token_length = model.parts().max_token_length;
  cfg.normalizer = model.parts().normalizer;
  cfg.pre_tokenizer = model.parts().pre_tokenizer;
  return cfg;
}

namespace {

using FlatCounts = std::unordered_map<std::uint64_t, std::uint64_t>;

struct PartialCounts {
  FlatCounts pairs;
  std::uint64_t segments = 0;
};

PairCounts to_pair_counts(PartialCounts&& partial) {
  PairCounts pc;
  pc.total_segments = partial.segments;
  for (const auto& [key, n] : partial.pairs) pc.counts.emplace(std::make_pair(pair_left(key), pair_right(key)), n);
  return pc;
}

void fold(PartialCounts& total, PartialCounts&& part) {
  if (total.pairs.size() < part.pairs.size()) std::swap(total.pairs, part.pairs);
  for (const auto& [key, n] : part.pairs) total.pairs[key] += n;
  total.segments += part.segments;
}

template <class SegmentAt>
PairCounts count_pairs_impl(const TokenizerModel& model, std::size_t n, SegmentAt segment_at) {
  auto partial = parallel_map_reduce<PartialCounts>(
      n,
      [&](PartialCounts& acc, std::size_t begin, std::size_t end) {
        std::vector<TokenId> ids;
        for (std::size_t i = begin; i < end; ++i) {
          const auto [seg, freq] = segment_at(i);
          ids.clear();
          model.tokenize_segment_into(seg, false, ids);
          for (std::size_t j = 0; j + 1 < ids.size(); ++j) acc.pairs[pair_key(ids[j], ids[j + 1])] += freq;
          acc.segments += freq;
        }
      },
      fold, 64);
  return to_pair_counts(std::move(partial));
}

bool blocked_token(const TokenizerModel& model, TokenId id) {
  return model.is_special(id) || model.is_byte_fallback_token(id) ||
         (model.parts().unk_token && *model.parts().unk_token == id);
}

std::size_t units(Mode mode, std::string_view s) {
  return mode == Mode::ByteLevel ? s.size() : unicode::length(s);
}

}  // namespace

PairCounts count_pairs(const TokenizerModel& model, const SegmentCounts& segments) {
  return count_pairs_impl(model, segments.size(), [&](std::size_t i) {
    return std::pair<std::string_view, std::uint64_t>(segments[i].first, segments[i].second);
  });
}

PairCounts count_pairs(const TokenizerModel& model, std::span<const std::string> segments) {
  return count_pairs_impl(model, segments.size(), [&](std::size_t i) {
    return std::pair<std::string_view, std::uint64_t>(segments[i], 1);
  });
}

bool is_valid_merge(Mode mode, std::string_view left, std::string_view right, const TrainerConfig& cfg) {
  if (cfg.max_token_length && units(mode, left) + units(mode, right) > *cfg.max_token_length) return false;
  if (mode == Mode::ByteLevel) return true;
  if (right.find(kWordBoundary) != std::string_view::npos) return false;
  const std::size_t marker = left.find(kWordBoundary, 1);
  if (marker != std::string_view::npos) return false;
  std::string joined;
  joined.reserve(left.size() + right.size());
  joined.append(left).append(right);
  return unicode::is_single_script(joined);
}

std::optional<MergeRule> select_next_merge(const PairCounts& pc, const TokenizerModel& model,
                                           const TrainerConfig& cfg) {
  std::optional<MergeRule> best;
  std::uint64_t best_count = 0;
  for (const auto& [pair, count] : pc.counts) {
    if (count < cfg.min_pair_frequency) continue;
    // std::map iterates in (left, right) order, so only a strictly larger
    // count displaces the incumbent.
    if (best && count <= best_count) continue;
    const auto [l, r] = pair;
    if (blocked_token(model, l) || blocked_token(model, r)) continue;
    const std::string& ls = model.token(l);
    const std::string& rs = model.token(r);
    if (!is_valid_merge(cfg.mode, ls, rs, cfg)) continue;
    if (model.find(ls + rs)) continue;
    best = MergeRule{l, r, static_cast<TokenId>(model.vocab_size())};
    best_count = count;
  }
  return best;
}

// --- MergeLearner ----------------------------------------------------------

MergeLearner::MergeLearner(const TokenizerModel& base, const SegmentCounts& segments, const TrainerConfig& cfg)
    : mode_(base.mode()), cfg_(cfg), tokens_(base.parts().tokens) {
  cfg_.mode = mode_;
  ids_.reserve(tokens_.size() * 2);
  blocked_.resize(tokens_.size());
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    ids_.emplace(tokens_[id], id);
    blocked_[id] = blocked_token(base, id);
  }

  words_.resize(segments.size());
  parallel_map_reduce<char>(
      segments.size(),
      [&](char&, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          base.tokenize_segment_into(segments[i].first, false, words_[i].symbols);
          words_[i].freq = segments[i].second;
        }
      },
      [](char&, char&&) {}, 64);

  stamp_.assign(words_.size(), 0);
  for (std::uint32_t w = 0; w < words_.size(); ++w) {
    const auto& s = words_[w].symbols;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      add_pair(pair_key(s[i], s[i + 1]), static_cast<std::int64_t>(words_[w].freq), w);
    }
  }
  touched_.clear();
  heap_.reserve(counts_.size());
  for (const auto& [key, n] : counts_) heap_.push_back({n, pair_left(key), pair_right(key)});
  std::make_heap(heap_.begin(), heap_.end(), HeapLess{});
}

void MergeLearner::add_pair(std::uint64_t key, std::int64_t delta, std::uint32_t word) {
  if (delta == 0) return;
  auto& c = counts_[key];
  c = static_cast<std::uint64_t>(static_cast<std::int64_t>(c) + delta);
  if (delta > 0) where_[key].push_back(word);
  if (c == 0) counts_.erase(key);
  touched_.push_back(key);
}

void MergeLearner::push(std::uint64_t key) {
  const auto it = counts_.find(key);
  if (it == counts_.end() || excluded_.count(key)) return;
  heap_.push_back({it->second, pair_left(key), pair_right(key)});
  std::push_heap(heap_.begin(), heap_.end(), HeapLess{});
}

bool MergeLearner::qualifies(TokenId left, TokenId right) {
  const std::uint64_t key = pair_key(left, right);
  bool ok = !blocked_[left] && !blocked_[right] && is_valid_merge(mode_, tokens_[left], tokens_[right], cfg_);
  // Another pair may already have produced the same string; vocabulary only
  // grows, so the exclusion is permanent.
  if (ok && ids_.count(tokens_[left] + tokens_[right])) ok = false;
  if (!ok) excluded_.insert(key);
  return ok;
}

std::optional<MergeRule> MergeLearner::step() {
  while (!heap_.empty()) {
    std::pop_heap(heap_.begin(), heap_.end(), HeapLess{});
    const HeapEntry top = heap_.back();
    heap_.pop_back();
    const std::uint64_t key = pair_key(top.left, top.right);
    const auto it = counts_.find(key);
    if (it == counts_.end() || it->second != top.count) continue;  // stale
    if (top.count < cfg_.min_pair_frequency) {
      heap_.push_back(top);
      std::push_heap(heap_.begin(), heap_.end(), HeapLess{});
      return std::nullopt;
    }
    if (excluded_.count(key)) continue;
    if (!qualifies(top.left, top.right)) {
      ++skipped_invalid_;
      continue;
    }

    const TokenId l = top.left;
    const TokenId r = top.right;
    const auto id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(tokens_[l] + tokens_[r]);
    ids_.emplace(tokens_.back(), id);
    blocked_.push_back(false);
    const MergeRule rule{l, r, id};
    new_merges_.push_back(rule);

    std::vector<std::uint32_t> affected = std::move(where_[key]);
    where_.erase(key);
    ++epoch_;
    touched_.clear();
    std::vector<std::pair<std::uint64_t, std::int64_t>> delta;
    std::vector<TokenId> merged;
    for (std::uint32_t w : affected) {
      if (stamp_[w] == epoch_) continue;
      stamp_[w] = epoch_;
      auto& sym = words_[w].symbols;
      merged.clear();
      bool hit = false;
      for (std::size_t i = 0; i < sym.size();) {
        if (i + 1 < sym.size() && sym[i] == l && sym[i + 1] == r) {
          merged.push_back(id);
          i += 2;
          hit = true;
        } else {
          merged.push_back(sym[i]);
          ++i;
        }
      }
      if (!hit) continue;

      delta.clear();
      for (std::size_t i = 0; i + 1 < sym.size(); ++i) delta.emplace_back(pair_key(sym[i], sym[i + 1]), -1);
      for (std::size_t i = 0; i + 1 < merged.size(); ++i) delta.emplace_back(pair_key(merged[i], merged[i + 1]), 1);
      std::sort(delta.begin(), delta.end());
      const auto freq = static_cast<std::int64_t>(words_[w].freq);
      for (std::size_t i = 0; i < delta.size();) {
        std::int64_t net = 0;
        std::size_t j = i;
        for (; j < delta.size() && delta[j].first == delta[i].first; ++j) net += delta[j].second;
        add_pair(delta[i].first, net * freq, w);
        i = j;
      }
      sym.swap(merged);
    }

    std::sort(touched_.begin(), touched_.end());
    touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
    for (std::uint64_t k : touched_) push(k);
    touched_.clear();
    return rule;
  }
  return std::nullopt;
}

std::map<std::pair<TokenId, TokenId>, std::uint64_t> MergeLearner::pair_counts() const {
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> out;
  for (const auto& [key, n] : counts_) out.emplace(std::make_pair(pair_left(key), pair_right(key)), n);
  return out;
}

std::uint64_t MergeLearner::total_tokens() const {
  std::uint64_t total = 0;
  for (const auto& w : words_) total += w.symbols.size() * w.freq;
  return total;
}

// --- from-scratch training -------------------------------------------------

ModelParts make_atomic_model(Mode mode, const std::vector<std::string>& characters, const TrainerConfig& cfg) {
  ModelParts parts;
  parts.mode = mode;
  parts.max_token_length = cfg.max_token_length;
  parts.normalizer = cfg.normalizer.value_or(default_normalizer(mode));
  parts.pre_tokenizer = cfg.pre_tokenizer.value_or(default_pre_tokenizer(mode));
  if (mode == Mode::ByteLevel) {
    parts.tokens.reserve(256);
    for (int b = 0; b < 256; ++b) parts.tokens.emplace_back(1, static_cast<char>(b));
    return parts;
  }
  parts.tokens.emplace_back("<unk>");
  parts.special_tokens.push_back(0);
  parts.unk_token = 0;
  // UTF-8 byte order is code point order.
  std::vector<std::string> chars = characters;
  std::sort(chars.begin(), chars.end());
  chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
  for (auto& c : chars) {
    if (c != "<unk>") parts.tokens.push_back(std::move(c));
  }
  return parts;
}

std::vector<std::string> corpus_characters(const SegmentCounts& segments) {
  std::set<std::string> chars;
  for (const auto& [seg, freq] : segments) {
    for (std::size_t pos = 0; pos < seg.size();) {
      const std::size_t len = unicode::char_length(seg, pos);
      chars.emplace(seg.substr(pos, len));
      pos += len;
    }
  }
  return {chars.begin(), chars.end()};
}

TrainResult train_bpe(const SegmentCounts& segments, const TrainerConfig& cfg) {
  if (segments.empty()) throw Error(ErrorCode::EmptyCorpus, "training corpus is empty");
  ModelParts parts = make_atomic_model(
      cfg.mode, cfg.mode == Mode::SentencePiece ? corpus_characters(segments) : std::vector<std::string>{}, cfg);
  if (cfg.target_vocab_size < parts.tokens.size()) {
    throw Error(ErrorCode::TargetTooSmall, "target vocabulary size " + std::to_string(cfg.target_vocab_size) +
                                               " is below the alphabet size " + std::to_string(parts.tokens.size()));
  }
  const TokenizerModel atomic(parts);
  MergeLearner learner(atomic, segments, cfg);
  bool stopped = false;
  while (learner.tokens().size() < cfg.target_vocab_size) {
    if (!learner.step()) {
      stopped = true;
      break;
    }
  }
  parts.tokens = learner.tokens();
  parts.merges = learner.new_merges();
  return TrainResult{TokenizerModel(std::move(parts)), learner.new_merges().size(), learner.skipped_invalid(),
                     stopped};
}

}  // namespace tokforge
