#include "tokforge/merge_graph.hpp"

#include <algorithm>

#include "tokforge/error.hpp"

namespace tokforge {

MergeGraph::MergeGraph(const TokenizerModel& model, const std::set<TokenId>& unreachable) {
  const std::size_t n = model.vocab_size();
  atomic_.assign(n, true);
  removed_.assign(n, false);
  downstream_.assign(n, 0);
  splits_.assign(n, std::nullopt);
  producers_.assign(n, {});

  for (const MergeRule& m : model.merges()) {
    if (m.left >= n || m.right >= n || m.result >= n) {
      throw Error(ErrorCode::InconsistentModel, "merge references a token missing from the vocabulary");
    }
    atomic_[m.result] = false;
    // Merges are visited in rank order, so the first producer is the
    // lowest-rank one.
    if (!splits_[m.result]) splits_[m.result] = TokenSplit{m.left, m.right};
    producers_[m.result].push_back({m.left, m.right});
    ++downstream_[m.left];
    if (m.right != m.left) ++downstream_[m.right];
  }

  for (TokenId t = 0; t < n; ++t) {
    if (!atomic_[t] && downstream_[t] == 0) leaves_.insert(t);
  }
  for (TokenId t : unreachable) {
    if (t >= n) throw Error(ErrorCode::InconsistentModel, "unreachable token id out of range");
    leaves_.insert(t);
  }
}

std::set<TokenId> MergeGraph::atomics() const {
  std::set<TokenId> out;
  for (TokenId t = 0; t < atomic_.size(); ++t) {
    if (atomic_[t]) out.insert(t);
  }
  return out;
}

std::vector<TokenId> MergeGraph::remove_leaf(TokenId token) {
  if (token >= size() || !leaves_.count(token)) {
    throw Error(ErrorCode::NotALeaf, "token " + std::to_string(token) + " is not a leaf");
  }
  leaves_.erase(token);
  removed_[token] = true;

  std::vector<TokenId> fresh;
  const auto decrement = [&](TokenId t) {
    if (downstream_[t] > 0) --downstream_[t];
    if (downstream_[t] == 0 && !atomic_[t] && !removed_[t] && !leaves_.count(t)) {
      leaves_.insert(t);
      fresh.push_back(t);
    }
  };
  for (const TokenSplit& s : producers_[token]) {
    decrement(s.left);
    if (s.right != s.left) decrement(s.right);
  }
  std::sort(fresh.begin(), fresh.end());
  fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());
  return fresh;
}

}  // namespace tokforge
