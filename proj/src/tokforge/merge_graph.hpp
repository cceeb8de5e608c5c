#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "tokforge/model.hpp"

namespace tokforge {

struct TokenSplit {
  TokenId left;
  TokenId right;

  bool operator==(const TokenSplit&) const = default;
};

// DAG induced by the merge list.
//
//   atomics           tokens produced by no merge
//   leaves            merged tokens that are no merge's operand, plus the
//                     supplied unreachable tokens (even ones no merge
//                     produces, such as orphans left behind by pruning)
//   downstream_merges number of merges using the token as an operand
//                     (a merge (t, t) counts once)
//   token_splits      operands of the lowest-rank merge producing the token
//
// remove_leaf() retires every merge producing the removed token, so tokens
// with several producing merges still drain completely.
class MergeGraph {
 public:
  MergeGraph(const TokenizerModel& model, const std::set<TokenId>& unreachable);

  std::size_t size() const { return downstream_.size(); }
  bool is_atomic(TokenId t) const { return atomic_[t]; }
  bool is_leaf(TokenId t) const { return leaves_.count(t) != 0; }
  bool is_removed(TokenId t) const { return removed_[t]; }
  std::uint32_t downstream_merges(TokenId t) const { return downstream_[t]; }
  const std::optional<TokenSplit>& split(TokenId t) const { return splits_[t]; }
  const std::vector<TokenSplit>& producers(TokenId t) const { return producers_[t]; }

  std::set<TokenId> atomics() const;
  const std::set<TokenId>& leaves() const { return leaves_; }

  // Removes a current leaf and returns the tokens that became leaves
  // (downstream count reached zero, not atomic), in ascending id order.
  std::vector<TokenId> remove_leaf(TokenId token);

 private:
  std::vector<bool> atomic_;
  std::vector<bool> removed_;
  std::vector<std::uint32_t> downstream_;
  std::vector<std::optional<TokenSplit>> splits_;
  std::vector<std::vector<TokenSplit>> producers_;
  std::set<TokenId> leaves_;
};

inline MergeGraph build_graph(const TokenizerModel& model, const std::set<TokenId>& unreachable = {}) {
  return MergeGraph(model, unreachable);
}

}  // namespace tokforge
