#include "tokforge/pruning.hpp"

#include <algorithm>
#include <functional>
#include <queue>

#include "tokforge/error.hpp"
#include "tokforge/merge_graph.hpp"
#include "tokforge/parallel.hpp"

namespace tokforge {

std::string_view prune_strategy_name(PruneStrategy strategy) {
  switch (strategy) {
    case PruneStrategy::LeafFrequency: return "leaf-freq";
    case PruneStrategy::MergeBased: return "merge-based";
    case PruneStrategy::NaiveFrequency: return "naive-freq";
    case PruneStrategy::LastId: return "last-id";
  }
  return "unknown";
}

namespace {

struct StatsAcc {
  std::vector<std::uint64_t> tokens;
  std::vector<std::uint64_t> fired;
  std::uint64_t segments = 0;
};

std::uint64_t count_of(const CorpusStats& stats, TokenId id) {
  return id < stats.tok_counts.size() ? stats.tok_counts[id] : 0;
}

}  // namespace

CorpusStats collect_stats(const TokenizerModel& model, const SegmentCounts& segments) {
  const std::size_t n_tokens = model.vocab_size();
  const std::size_t n_merges = model.merges().size();
  auto acc = parallel_map_reduce<StatsAcc>(
      segments.size(),
      [&](StatsAcc& a, std::size_t begin, std::size_t end) {
        a.tokens.assign(n_tokens, 0);
        a.fired.assign(n_merges, 0);
        std::vector<TokenId> ids;
        std::vector<std::uint32_t> ranks;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& [seg, freq] = segments[i];
          ids.clear();
          ranks.clear();
          model.tokenize_segment_into(seg, false, ids, &ranks);
          for (TokenId id : ids) a.tokens[id] += freq;
          for (std::uint32_t r : ranks) a.fired[r] += freq;
          a.segments += freq;
        }
      },
      [](StatsAcc& total, StatsAcc&& part) {
        for (std::size_t i = 0; i < total.tokens.size(); ++i) total.tokens[i] += part.tokens[i];
        for (std::size_t i = 0; i < total.fired.size(); ++i) total.fired[i] += part.fired[i];
        total.segments += part.segments;
      },
      64);

  CorpusStats stats;
  stats.tok_counts = std::move(acc.tokens);
  stats.tok_counts.resize(n_tokens, 0);
  stats.segments_seen = acc.segments;
  acc.fired.resize(n_merges, 0);
  for (std::size_t r = 0; r < n_merges; ++r) {
    if (acc.fired[r] == 0) continue;
    const MergeRule& m = model.merges()[r];
    stats.merge_counts[{m.left, m.right}] += acc.fired[r];
  }
  return stats;
}

std::set<TokenId> protected_tokens(const TokenizerModel& model) {
  std::set<TokenId> out = build_graph(model).atomics();
  out.insert(model.parts().special_tokens.begin(), model.parts().special_tokens.end());
  return out;
}

PruneOrder leaf_frequency_prune_order(const TokenizerModel& model, const CorpusStats& stats,
                                      const std::set<TokenId>& unreachable) {
  MergeGraph graph(model, unreachable);
  PruneOrder order;
  order.strategy = PruneStrategy::LeafFrequency;
  order.protected_tokens = protected_tokens(model);
  // Unreachable orphans have no producing merge but are still prunable.
  for (TokenId t : unreachable) {
    if (!model.is_special(t)) order.protected_tokens.erase(t);
  }

  std::vector<std::uint64_t> freq(model.vocab_size());
  for (TokenId t = 0; t < freq.size(); ++t) freq[t] = count_of(stats, t);

  using Entry = std::pair<std::uint64_t, TokenId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::vector<bool> queued(model.vocab_size(), false);
  const auto enqueue = [&](TokenId t) {
    if (order.protected_tokens.count(t)) return;
    queued[t] = true;
    queue.emplace(freq[t], t);
  };
  for (TokenId t : graph.leaves()) enqueue(t);

  while (!queue.empty()) {
    const auto [f, t] = queue.top();
    queue.pop();
    if (graph.is_removed(t) || f != freq[t]) continue;
    order.tokens.push_back(t);
    if (const auto& split = graph.split(t)) {
      for (TokenId operand : {split->left, split->right}) {
        freq[operand] += freq[t];
        if (queued[operand] && !graph.is_removed(operand)) queue.emplace(freq[operand], operand);
      }
    }
    for (TokenId fresh : graph.remove_leaf(t)) enqueue(fresh);
  }
  return order;
}

PruneOrder merge_based_prune_order(const TokenizerModel& model, const CorpusStats& stats) {
  PruneOrder order;
  order.strategy = PruneStrategy::MergeBased;
  order.protected_tokens = protected_tokens(model);

  std::vector<std::uint64_t> counts(model.vocab_size());
  for (TokenId t = 0; t < counts.size(); ++t) counts[t] = count_of(stats, t);
  for (const auto& [pair, n] : stats.merge_counts) {
    counts.at(pair.first) += n;
    counts.at(pair.second) += n;
  }
  for (TokenId t = 0; t < counts.size(); ++t) {
    if (!order.protected_tokens.count(t)) order.tokens.push_back(t);
  }
  std::sort(order.tokens.begin(), order.tokens.end(), [&](TokenId a, TokenId b) {
    if (counts[a] != counts[b]) return counts[a] < counts[b];
    const std::size_t la = model.token_units(a);
    const std::size_t lb = model.token_units(b);
    if (la != lb) return la > lb;
    return a < b;
  });
  return order;
}

PruneOrder naive_frequency_prune_order(const TokenizerModel& model, const CorpusStats& stats) {
  PruneOrder order;
  order.strategy = PruneStrategy::NaiveFrequency;
  order.protected_tokens = protected_tokens(model);
  for (TokenId t = 0; t < model.vocab_size(); ++t) {
    if (!order.protected_tokens.count(t)) order.tokens.push_back(t);
  }
  std::stable_sort(order.tokens.begin(), order.tokens.end(),
                   [&](TokenId a, TokenId b) { return count_of(stats, a) < count_of(stats, b); });
  return order;
}

PruneOrder id_prune_order(const TokenizerModel& model) {
  PruneOrder order;
  order.strategy = PruneStrategy::LastId;
  order.protected_tokens = protected_tokens(model);
  for (TokenId t = static_cast<TokenId>(model.vocab_size()); t-- > 0;) {
    if (!order.protected_tokens.count(t)) order.tokens.push_back(t);
  }
  return order;
}

TokenizerModel apply_prune(const TokenizerModel& model, const PruneOrder& order, std::size_t k) {
  if (k > order.tokens.size()) {
    throw Error(ErrorCode::InvalidArgument, "k = " + std::to_string(k) + " exceeds the prune order length " +
                                                std::to_string(order.tokens.size()));
  }
  if (k == 0) return model;

  const std::size_t n = model.vocab_size();
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < k; ++i) {
    const TokenId t = order.tokens[i];
    if (t >= n) throw Error(ErrorCode::UnknownId, "prune order names unknown token " + std::to_string(t));
    if (model.is_special(t)) throw Error(ErrorCode::InvalidArgument, "prune order names a special token");
    removed[t] = true;
  }

  const ModelParts& old = model.parts();
  ModelParts parts = old;
  parts.tokens.clear();
  parts.merges.clear();
  parts.special_tokens.clear();
  std::vector<TokenId> remap(n, kNoToken);
  for (TokenId t = 0; t < n; ++t) {
    if (removed[t]) continue;
    remap[t] = static_cast<TokenId>(parts.tokens.size());
    parts.tokens.push_back(old.tokens[t]);
  }
  for (const MergeRule& m : old.merges) {
    if (removed[m.left] || removed[m.right] || removed[m.result]) continue;
    parts.merges.push_back({remap[m.left], remap[m.right], remap[m.result]});
  }
  for (TokenId s : old.special_tokens) parts.special_tokens.push_back(remap[s]);
  if (old.unk_token) {
    parts.unk_token = removed[*old.unk_token] ? std::nullopt : std::optional<TokenId>(remap[*old.unk_token]);
  }
  return TokenizerModel(std::move(parts));
}

}  // namespace tokforge
