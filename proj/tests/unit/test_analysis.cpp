#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "toy.hpp"
#include "tokforge/analysis.hpp"
#include "tokforge/extension.hpp"
#include "tokforge/trainer.hpp"

using namespace tokforge;
using toy::id_of;

namespace {

using Docs = std::vector<std::string>;

TrainerConfig cfg_min(std::uint64_t min_freq) {
  TrainerConfig cfg = TrainerConfig::defaults(Mode::ByteLevel);
  cfg.min_pair_frequency = min_freq;
  cfg.max_token_length.reset();
  return cfg;
}

// Direct evaluation of H_alpha(p) / log(V), independent of the library.
double renyi_oracle(const std::vector<std::uint64_t>& counts, std::size_t vocab, double alpha) {
  long double total = 0;
  for (auto c : counts) total += c;
  long double sum = 0;
  for (auto c : counts) {
    if (c) sum += std::pow(static_cast<long double>(c) / total, static_cast<long double>(alpha));
  }
  return static_cast<double>(std::log(sum) / (1.0L - alpha) / std::log(static_cast<long double>(vocab)));
}

void all_strings(const std::string& alphabet, std::size_t max_len, std::vector<std::string>& out,
                 std::string prefix = "") {
  if (!prefix.empty()) out.push_back(prefix);
  if (prefix.size() == max_len) return;
  for (char c : alphabet) all_strings(alphabet, max_len, out, prefix + c);
}

}  // namespace

TEST(Stt, Examples) {
  EXPECT_EQ(stt(toy::toy1()).count, 0u);
  const auto t2 = toy::toy2();
  const auto r = stt(t2);
  EXPECT_EQ(r.count, 1u);
  EXPECT_EQ(r.unreachable, (std::set<TokenId>{id_of(t2, "bc")}));
  EXPECT_EQ(stt(toy::model({"a", "b", "c"}, {})).count, 0u);
}

TEST(Stt, SkipsSpecialAndIgnoresSkipping) {
  ModelParts p = toy::parts({"a", "b", "c", "ab", "abc", "bc", "<s>"}, {{"a", "b"}, {"ab", "c"}}, Mode::ByteLevel,
                            PreTokenizerConfig::whitespace(true), true);
  p.special_tokens = {6};
  const TokenizerModel m(p);
  const auto r = stt(m);
  EXPECT_EQ(r.count, 1u);
  EXPECT_EQ(r.skipped_special, 1u);
}

TEST(Stt, DeltaComparesByContent) {
  const auto before = toy::toy1();
  const auto after = toy::model({"a", "b", "c", "d", "abc"}, {});
  EXPECT_EQ(stt_delta(before, after), (std::set<std::string>{"abc"}));
  EXPECT_TRUE(stt_delta(toy::toy2(), toy::toy2()).empty());
}

// Brute force: a token is flagged exactly when no input string up to length
// 12 ever yields it.
TEST(Stt, SoundAgainstExhaustiveEnumeration) {
  std::mt19937_64 rng(81);
  std::vector<std::string> inputs;
  all_strings("ab", 12, inputs);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = toy::build(toy::random_model(rng, "ab", 14));
    std::set<TokenId> produced;
    for (const auto& s : inputs) {
      for (TokenId t : m.tokenize_segment(s, false)) produced.insert(t);
    }
    std::set<TokenId> never;
    for (TokenId t = 0; t < m.vocab_size(); ++t) {
      if (!produced.count(t)) never.insert(t);
    }
    ASSERT_EQ(stt(m).unreachable, never) << "trial " << trial;
  }
}

TEST(Compression, Examples) {
  const auto m = toy::toy1();
  const Docs docs = {"abc abd"};
  const auto c = compression(m, docs, true);
  EXPECT_EQ(c.byte_count, 7u);
  EXPECT_EQ(c.token_count, 3u);
  EXPECT_NEAR(c.bytes_per_token, 7.0 / 3.0, 1e-12);

  EXPECT_DOUBLE_EQ(compression(m, Docs{"abc"}, false).bytes_per_token, 3.0);

  const auto ext = continued_extend(m, SegmentCounts{{"abc", 1}, {"abd", 2}}, 1, cfg_min(2)).model;
  EXPECT_DOUBLE_EQ(compression(ext, docs, true).bytes_per_token, 3.5);

  EXPECT_EQ(toy::error_of([&] { compression(m, Docs{}, true); }), ErrorCode::EmptyCorpus);
  EXPECT_EQ(toy::error_of([&] { compression(m, Docs{"   "}, true); }), ErrorCode::EmptyCorpus);
}

TEST(Compression, ShardAdditiveAndOrderFree) {
  std::mt19937_64 rng(83);
  const auto m = train_bpe(count_segments(toy::random_segments(rng, "abcde", 300, 8)), [] {
                   auto c = cfg_min(2);
                   c.target_vocab_size = 256 + 30;
                   return c;
                 }()).model;
  Docs docs;
  for (int i = 0; i < 40; ++i) docs.push_back(toy::random_segment(rng, "abcde ", 1, 30));
  const auto whole = compression(m, docs, true);
  const Docs left(docs.begin(), docs.begin() + 17), right(docs.begin() + 17, docs.end());
  const auto a = compression(m, left, true), b = compression(m, right, true);
  EXPECT_EQ(whole.byte_count, a.byte_count + b.byte_count);
  EXPECT_EQ(whole.token_count, a.token_count + b.token_count);
  Docs shuffled = docs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_EQ(compression(m, shuffled, true).token_count, whole.token_count);
}

TEST(Compression, SkippingIrrelevantWhenAllReachable) {
  std::mt19937_64 rng(87);
  for (int trial = 0; trial < 30; ++trial) {
    const auto r = toy::random_model(rng, "abc", 20, false);
    const auto m = toy::build(r, true);
    if (stt(m).count != 0) continue;
    Docs docs;
    for (int i = 0; i < 10; ++i) docs.push_back(toy::random_segment(rng, "abc ", 1, 20));
    if (compression(m, docs, false).token_count == 0) continue;
    ASSERT_EQ(compression(m, docs, true).token_count, compression(m, docs, false).token_count);
  }
}

TEST(Renyi, ClosedForms) {
  EXPECT_NEAR(renyi_efficiency_from_counts(std::vector<std::uint64_t>{3, 3, 3, 3}, 4, {2.5, false}), 1.0, 1e-9);
  EXPECT_NEAR(renyi_efficiency_from_counts(std::vector<std::uint64_t>{5, 5, 0, 0}, 4, {2.0, false}), 0.5, 1e-9);
  // Observed denominator: two observed types, uniform over them.
  EXPECT_NEAR(renyi_efficiency_from_counts(std::vector<std::uint64_t>{5, 5, 0, 0}, 4, {2.0, true}), 1.0, 1e-9);
}

TEST(Renyi, MatchesOracleAndRelabeling) {
  std::mt19937_64 rng(89);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint64_t> counts(2 + rng() % 50);
    for (auto& c : counts) c = rng() % 100;
    counts[0] = 1 + counts[0];
    counts[1] = 1 + counts[1];
    const double alpha = std::vector<double>{0.5, 2.0, 2.5, 3.0, 0.0}[rng() % 5];
    const double got = renyi_efficiency_from_counts(counts, counts.size(), {alpha, false});
    ASSERT_NEAR(got, renyi_oracle(counts, counts.size(), alpha), 1e-9);
    ASSERT_GE(got, -1e-12);
    ASSERT_LE(got, 1.0 + 1e-12);
    auto shuffled = counts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_NEAR(renyi_efficiency_from_counts(shuffled, counts.size(), {alpha, false}), got, 1e-12);
  }
}

TEST(Renyi, Errors) {
  const auto m = toy::toy1();
  EXPECT_EQ(toy::error_of([&] { renyi_efficiency(m, Docs{"abc abc"}); }), ErrorCode::DegenerateDistribution);
  EXPECT_EQ(toy::error_of([&] { renyi_efficiency(m, Docs{}); }), ErrorCode::EmptyCorpus);
  EXPECT_EQ(toy::error_of([&] { renyi_efficiency(m, Docs{"abc d"}, {1.0, false}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(toy::error_of([&] { renyi_efficiency(m, Docs{"abc d"}, {-1.0, false}); }), ErrorCode::InvalidArgument);
  EXPECT_NEAR(renyi_efficiency(m, Docs{"abc d"}, {2.0, false}), renyi_oracle({1, 1}, 6, 2.0), 1e-12);
}

TEST(UnusedAdded, XyzContrast) {
  const auto base = toy::model({"x", "y", "z", "xy"}, {{"x", "y"}});
  const SegmentCounts segs = {{"xyz", 1}, {"yz", 1}};
  const auto naive = naive_extend(base, segs, 2, NaiveStrategy::Regen, cfg_min(1));
  const std::set<TokenId> naive_added(naive.report.added_tokens.begin(), naive.report.added_tokens.end());
  const auto u = unused_added(naive.model, naive_added, Docs{"xyz"});
  EXPECT_EQ(u.added, 2u);
  EXPECT_EQ(u.unused, 2u);
  EXPECT_DOUBLE_EQ(u.fraction, 1.0);
  // A skipping model emits xyz whole; forcing skipping off restores 1.0.
  const auto skip_base = toy::model({"x", "y", "z", "xy"}, {{"x", "y"}}, true);
  const auto skip = naive_extend(skip_base, segs, 2, NaiveStrategy::Regen, cfg_min(1));
  const std::set<TokenId> skip_added(skip.report.added_tokens.begin(), skip.report.added_tokens.end());
  EXPECT_DOUBLE_EQ(unused_added(skip.model, skip_added, Docs{"xyz"}).fraction, 0.5);
  EXPECT_DOUBLE_EQ(unused_added(skip.model, skip_added, Docs{"xyz"}, false).fraction, 1.0);

  const auto cont = continued_extend(base, segs, 2, cfg_min(1));
  const std::set<TokenId> cont_added(cont.report.added_tokens.begin(), cont.report.added_tokens.end());
  ASSERT_TRUE(cont_added.count(id_of(cont.model, "xyz")));
  const auto v = unused_added(cont.model, {id_of(cont.model, "xyz")}, Docs{"xyz"});
  EXPECT_DOUBLE_EQ(v.fraction, 0.0);

  EXPECT_EQ(toy::error_of([&] { unused_added(base, {}, Docs{"xyz"}); }), ErrorCode::EmptySet);
}

TEST(Histogram, Examples) {
  const auto m = toy::toy1();
  using Rows = std::vector<std::pair<TokenId, std::uint64_t>>;
  EXPECT_EQ(frequency_histogram(m, Docs{"abc", "abc", "abc"}, std::nullopt), (Rows{{id_of(m, "abc"), 3}}));
  EXPECT_TRUE(frequency_histogram(m, Docs{}, std::nullopt).empty());
  const auto rows = frequency_histogram(m, Docs{"abc ab d d c abc"}, std::set<TokenId>{id_of(m, "ab"), id_of(m, "abc")});
  EXPECT_EQ(rows, (Rows{{id_of(m, "abc"), 2}, {id_of(m, "ab"), 1}}));
  const auto full = frequency_histogram(m, Docs{"abc ab d d c abc"}, std::nullopt);
  EXPECT_EQ(full, (Rows{{id_of(m, "d"), 2}, {id_of(m, "abc"), 2}, {id_of(m, "c"), 1}, {id_of(m, "ab"), 1}}));
  const auto zero = frequency_histogram(m, Docs{"d"}, std::set<TokenId>{id_of(m, "ab")});
  EXPECT_EQ(zero, (Rows{{id_of(m, "ab"), 0}}));
}

TEST(Csv, Quoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("line\nbreak"), "\"line\nbreak\"");
  EXPECT_EQ(csv_field(""), "");
}
