#include <gtest/gtest.h>

#include <functional>

#include "toy.hpp"
#include "tokforge/merge_graph.hpp"

using namespace tokforge;
using toy::id_of;

namespace {

std::set<std::string> names(const TokenizerModel& m, const std::set<TokenId>& ids) {
  std::set<std::string> out;
  for (TokenId t : ids) out.insert(m.token(t));
  return out;
}

}  // namespace

TEST(MergeGraph, Toy1Structure) {
  const auto m = toy::toy1();
  const auto g = build_graph(m);
  EXPECT_EQ(names(m, g.atomics()), (std::set<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(names(m, g.leaves()), (std::set<std::string>{"abc"}));
  EXPECT_EQ(g.split(id_of(m, "ab")), (TokenSplit{id_of(m, "a"), id_of(m, "b")}));
  EXPECT_EQ(g.split(id_of(m, "abc")), (TokenSplit{id_of(m, "ab"), id_of(m, "c")}));
  EXPECT_FALSE(g.split(id_of(m, "a")).has_value());
  const std::map<std::string, std::uint32_t> expected{{"a", 1}, {"b", 1}, {"ab", 1}, {"c", 1}, {"abc", 0}, {"d", 0}};
  for (const auto& [tok, n] : expected) EXPECT_EQ(g.downstream_merges(id_of(m, tok)), n) << tok;
}

TEST(MergeGraph, NoMerges) {
  const auto m = toy::model({"a", "b", "c"}, {});
  const auto g = build_graph(m);
  EXPECT_EQ(g.atomics().size(), 3u);
  EXPECT_TRUE(g.leaves().empty());
  const auto g2 = build_graph(m, {1});
  EXPECT_EQ(g2.leaves(), (std::set<TokenId>{1}));
}

TEST(MergeGraph, UnreachableTokensAreLeaves) {
  const auto m = toy::toy2();
  const auto g = build_graph(m, {id_of(m, "bc")});
  EXPECT_EQ(names(m, g.leaves()), (std::set<std::string>{"abc", "bc"}));
}

TEST(MergeGraph, RemovalExposesNewLeaves) {
  const auto m = toy::toy1();
  auto g = build_graph(m);
  EXPECT_EQ(g.remove_leaf(id_of(m, "abc")), (std::vector<TokenId>{id_of(m, "ab")}));
  EXPECT_TRUE(g.is_leaf(id_of(m, "ab")));
  EXPECT_TRUE(g.remove_leaf(id_of(m, "ab")).empty());
  EXPECT_TRUE(g.leaves().empty());
  EXPECT_TRUE(g.is_removed(id_of(m, "abc")));
}

TEST(MergeGraph, NotALeaf) {
  const auto m = toy::toy1();
  auto g = build_graph(m);
  EXPECT_EQ(toy::error_of([&] { g.remove_leaf(id_of(m, "ab")); }), ErrorCode::NotALeaf);
  EXPECT_EQ(toy::error_of([&] { g.remove_leaf(id_of(m, "a")); }), ErrorCode::NotALeaf);
}

TEST(MergeGraph, DuplicateProducersKeepLowestRank) {
  const auto m = toy::model({"a", "b", "c", "ab", "bc", "abc"}, {{"a", "b"}, {"b", "c"}, {"ab", "c"}, {"a", "bc"}});
  auto g = build_graph(m);
  EXPECT_EQ(g.split(id_of(m, "abc")), (TokenSplit{id_of(m, "ab"), id_of(m, "c")}));
  EXPECT_EQ(g.producers(id_of(m, "abc")).size(), 2u);
  EXPECT_EQ(g.downstream_merges(id_of(m, "a")), 2u);
  // Removing abc retires both producers, so ab and bc both become leaves.
  EXPECT_EQ(g.remove_leaf(id_of(m, "abc")), (std::vector<TokenId>{id_of(m, "ab"), id_of(m, "bc")}));
}

TEST(MergeGraph, SelfPairCountsOnce) {
  const auto m = toy::model({"a", "aa"}, {{"a", "a"}});
  EXPECT_EQ(build_graph(m).downstream_merges(0), 1u);
}

// Draining leaves in any order removes exactly the non-atomic vocabulary plus
// the supplied unreachable orphans, and
// splits always bottom out in atomics that spell the token.
TEST(MergeGraph, PropertiesOnRandomModels) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 400; ++trial) {
    const auto r = toy::random_model(rng, "abcd", 25);
    const auto m = toy::build(r);
    std::set<TokenId> unreachable;
    for (const auto& s : toy::oracle_unreachable(m)) unreachable.insert(id_of(m, s));
    auto g = build_graph(m, unreachable);

    std::size_t non_atomic = 0;
    for (TokenId t = 0; t < m.vocab_size(); ++t) {
      ASSERT_NE(g.is_atomic(t), g.split(t).has_value());
      if (g.is_atomic(t)) continue;
      ++non_atomic;
      std::function<std::string(TokenId)> spell = [&](TokenId u) -> std::string {
        if (g.is_atomic(u)) return m.token(u);
        return spell(g.split(u)->left) + spell(g.split(u)->right);
      };
      ASSERT_EQ(spell(t), m.token(t));
    }

    std::set<TokenId> removed;
    while (!g.leaves().empty()) {
      const auto& leaves = g.leaves();
      auto it = leaves.begin();
      std::advance(it, static_cast<long>(rng() % leaves.size()));
      const TokenId t = *it;
      ASSERT_TRUE(!g.is_atomic(t) || unreachable.count(t));
      for (TokenId n : g.remove_leaf(t)) ASSERT_FALSE(g.is_atomic(n));
      ASSERT_TRUE(removed.insert(t).second);
    }
    std::size_t orphans = 0;
    for (TokenId t : unreachable) orphans += g.is_atomic(t) ? 1 : 0;
    ASSERT_EQ(removed.size(), non_atomic + orphans);
  }
}
