#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokforge/corpus.hpp"
#include "tokforge/model.hpp"

namespace tokforge {

struct CorpusStats {
  std::vector<std::uint64_t> tok_counts;  // indexed by token id
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> merge_counts;
  std::uint64_t segments_seen = 0;
};

// Token and merge-firing counts over the segments, merge skipping off.
CorpusStats collect_stats(const TokenizerModel& model, const SegmentCounts& segments);

enum class PruneStrategy { LeafFrequency, MergeBased, NaiveFrequency, LastId };

std::string_view prune_strategy_name(PruneStrategy strategy);

struct PruneOrder {
  std::vector<TokenId> tokens;  // pruned first to last
  PruneStrategy strategy = PruneStrategy::LeafFrequency;
  std::set<TokenId> protected_tokens;
};

// Atomic and special tokens; never part of an order.
std::set<TokenId> protected_tokens(const TokenizerModel& model);

// Leaves are popped from a min-heap keyed (frequency, id). A popped token's
// frequency is absorbed by the operands of its producing merge, and operands
// left without downstream merges join the heap.
PruneOrder leaf_frequency_prune_order(const TokenizerModel& model, const CorpusStats& stats,
                                      const std::set<TokenId>& unreachable = {});

// Counts augmented with merge firings per operand, sorted ascending, ties by
// descending length then ascending id.
PruneOrder merge_based_prune_order(const TokenizerModel& model, const CorpusStats& stats);

PruneOrder naive_frequency_prune_order(const TokenizerModel& model, const CorpusStats& stats);

PruneOrder id_prune_order(const TokenizerModel& model);

// Removes the first k tokens of the order and every merge that outputs or
// consumes one of them, then renumbers the survivors in their old order.
TokenizerModel apply_prune(const TokenizerModel& model, const PruneOrder& order, std::size_t k);

}  // namespace tokforge
