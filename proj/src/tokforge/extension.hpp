#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "tokforge/corpus.hpp"
#include "tokforge/model.hpp"
#include "tokforge/trainer.hpp"

namespace tokforge {

struct ExtensionReport {
  std::vector<TokenId> added_tokens;
  std::size_t added_merges = 0;
  std::uint64_t skipped_invalid = 0;
  std::size_t chars_added_for_coverage = 0;
  // Fewer than the requested number of tokens could be added.
  bool exhausted = false;
};

struct ExtensionResult {
  TokenizerModel model;
  ExtensionReport report;
};

// Continues BPE merge learning from the model's own state. In SentencePiece
// mode with character coverage, corpus characters missing from the
// vocabulary are added first (most frequent first) and count toward n_new.
ExtensionResult continued_extend(const TokenizerModel& model, const SegmentCounts& segments, std::size_t n_new,
                                 const TrainerConfig& cfg);

enum class NaiveStrategy { Regen, Append };

// Trains (or takes) an auxiliary tokenizer and adds its tokens that are
// absent from the model, in auxiliary vocabulary order.
//   Regen   each added merged token gets the auxiliary tokenizer's own
//           production split as its merge, appended in auxiliary order
//   Append  the auxiliary merge-list entries producing added tokens are
//           appended in auxiliary merge order
// Operands missing from the model are added first and count toward n_new.
// Without `aux` the auxiliary tokenizer is trained on the segments with the
// model's mode and pipeline; it then has exactly one producing merge per
// token and both strategies coincide.
ExtensionResult naive_extend(const TokenizerModel& model, const SegmentCounts& segments, std::size_t n_new,
                             NaiveStrategy strategy, const TrainerConfig& cfg, const TokenizerModel* aux = nullptr);

}  // namespace tokforge
