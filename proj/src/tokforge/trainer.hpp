#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tokforge/corpus.hpp"
#include "tokforge/model.hpp"

namespace tokforge {

struct PairCounts {
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> counts;
  std::uint64_t total_segments = 0;
};

struct TrainerConfig {
  std::size_t target_vocab_size = 0;  // train_bpe only
  std::uint64_t min_pair_frequency = 2;
  Mode mode = Mode::ByteLevel;
  std::optional<std::size_t> max_token_length;  // in atomic units; nullopt = unbounded
  bool character_coverage = true;                // SentencePiece only

  // Pipeline of freshly trained models; mode defaults when unset.
  std::optional<NormalizerConfig> normalizer;
  std::optional<PreTokenizerConfig> pre_tokenizer;

  static TrainerConfig defaults(Mode mode);
  // Mode and length bound taken from an existing model.
  static TrainerConfig for_model(const TokenizerModel& model);
};

// Adjacent-pair counts of the segments tokenized with merge skipping off.
// Each segment contributes its frequency once per adjacency.
PairCounts count_pairs(const TokenizerModel& model, const SegmentCounts& segments);
PairCounts count_pairs(const TokenizerModel& model, std::span<const std::string> segments);

bool is_valid_merge(Mode mode, std::string_view left, std::string_view right, const TrainerConfig& cfg);

// Highest-count valid pair (count >= min_pair_frequency), ties to the smaller
// (left, right). Pairs whose concatenation is already a token, or that
// involve special or byte-fallback tokens, never qualify. The result id is the
// next free id.
std::optional<MergeRule> select_next_merge(const PairCounts& pc, const TokenizerModel& model,
                                           const TrainerConfig& cfg);

// Incremental BPE merge learning over a weighted set of segments, starting
// from whatever merges `base` already has. Pair counts are kept up to date by
// re-examining only the segments containing the merged pair.
class MergeLearner {
 public:
  MergeLearner(const TokenizerModel& base, const SegmentCounts& segments, const TrainerConfig& cfg);

  // Selects, records and applies the next merge; nullopt when none qualifies.
  std::optional<MergeRule> step();

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<MergeRule>& new_merges() const { return new_merges_; }
  std::uint64_t skipped_invalid() const { return skipped_invalid_; }
  // Current non-zero pair counts.
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> pair_counts() const;
  // Sum over segments of token count times frequency.
  std::uint64_t total_tokens() const;

 private:
  struct Word {
    std::vector<TokenId> symbols;
    std::uint64_t freq = 0;
  };
  struct HeapEntry {
    std::uint64_t count;
    TokenId left;
    TokenId right;
  };
  struct HeapLess {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
      if (a.count != b.count) return a.count < b.count;
      if (a.left != b.left) return a.left > b.left;
      return a.right > b.right;
    }
  };

  bool qualifies(TokenId left, TokenId right);
  void add_pair(std::uint64_t key, std::int64_t delta, std::uint32_t word);
  void push(std::uint64_t key);

  Mode mode_;
  TrainerConfig cfg_;
  std::vector<std::string> tokens_;
  std::vector<bool> blocked_;  // specials, unknown and byte-fallback tokens
  std::unordered_map<std::string, TokenId> ids_;
  std::vector<Word> words_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where_;
  std::unordered_set<std::uint64_t> excluded_;
  std::vector<HeapEntry> heap_;
  std::vector<std::uint64_t> touched_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<MergeRule> new_merges_;
  std::uint64_t skipped_invalid_ = 0;
};

// Atomic-only starting point for training. ByteLevel: the 256 byte values with
// id = byte. SentencePiece: "<unk>" (id 0, special) then the given characters
// in code point order.
ModelParts make_atomic_model(Mode mode, const std::vector<std::string>& characters, const TrainerConfig& cfg);

// Distinct characters (code points) appearing in the segments, ascending.
std::vector<std::string> corpus_characters(const SegmentCounts& segments);

struct TrainResult {
  TokenizerModel model;
  std::size_t merges_added = 0;
  std::uint64_t skipped_invalid = 0;
  bool stopped_early = false;  // no qualifying pair before the target size
};

TrainResult train_bpe(const SegmentCounts& segments, const TrainerConfig& cfg);

}  // namespace tokforge
