// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "toy.hpp"
#include "tokforge/analysis.hpp"
#include "tokforge/extension.hpp"
#include "tokforge/fvt.hpp"
#include "tokforge/pruning.hpp"
#include "tokforge/serialization.hpp"
#include "tokforge/trainer.hpp"

using namespace tokforge;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first failure message; later checks still run cheaply.
struct Check {
  Outcome out;
  void expect(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

TrainerConfig byte_cfg(std::uint64_t min_freq, std::size_t target = 0) {
  TrainerConfig cfg = TrainerConfig::defaults(Mode::ByteLevel);
  cfg.min_pair_frequency = min_freq;
  cfg.max_token_length.reset();
  cfg.target_vocab_size = target;
  return cfg;
}

SegmentCounts random_corpus(std::mt19937_64& rng, const std::string& alphabet, std::size_t n, std::size_t max_len) {
  return count_segments(toy::random_segments(rng, alphabet, n, max_len));
}

std::set<std::string> new_unreachable(const TokenizerModel& before, const TokenizerModel& after) {
  const auto old_set = toy::oracle_unreachable(before);
  std::set<std::string> out;
  for (const auto& s : toy::oracle_unreachable(after)) {
    if (!old_set.count(s)) out.insert(s);
  }
  return out;
}

bool has_duplicate_producers(const toy::RandomModel& r) {
  std::set<std::string> seen;
  for (const auto& [l, rr] : r.merges) {
    if (!seen.insert(l + rr).second) return true;
  }
  return false;
}

TokenizerModel xy_base(bool ignore_merges) { return toy::model({"x", "y", "z", "xy"}, {{"x", "y"}}, ignore_merges); }

const SegmentCounts kXyzCorpus = {{"xyz", 1}, {"yz", 1}};

// --- criteria -------------------------------------------------------------

Outcome tokenizer_oracle() {
  Check c;
  std::mt19937_64 rng(1001);
  std::size_t segments = 0;
  const auto t0 = Clock::now();
  while (segments < 10000) {
    const auto r = toy::random_model(rng, "abcd", 30);
    const auto m = toy::build(r);
    for (int k = 0; k < 20; ++k, ++segments) {
      const std::string seg = toy::random_segment(rng, "abcd", 1, 12);
      c.expect(toy::contents(m, m.tokenize_segment(seg, false)) == toy::oracle_tokenize(r.merges, seg),
               "mismatch on segment " + seg);
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "took " + std::to_string(secs) + " s");
  if (c.out.pass) c.out.detail = std::to_string(segments) + " segments in " + std::to_string(secs) + " s";
  return c.out;
}

Outcome from_scratch_equivalence() {
  Check c;
  std::mt19937_64 rng(1002);
  for (int i = 0; i < 100; ++i) {
    auto cfg = byte_cfg(1 + rng() % 2);
    const std::size_t n = 1 + rng() % 40;
    cfg.target_vocab_size = 256 + n;
    const auto segs = random_corpus(rng, "abcde", 50 + rng() % 400, 10);
    const TokenizerModel atomic(make_atomic_model(Mode::ByteLevel, {}, cfg));
    const auto ext = continued_extend(atomic, segs, n, cfg);
    const auto trained = train_bpe(segs, cfg);
    c.expect(ext.model.parts().merges == trained.model.parts().merges &&
                 ext.model.parts().tokens == trained.model.parts().tokens,
             "corpus " + std::to_string(i) + " differs");
  }
  if (c.out.pass) c.out.detail = "100 corpora";
  return c.out;
}

Outcome prefix_consistency() {
  Check c;
  std::mt19937_64 rng(1003);
  for (int i = 0; i < 50; ++i) {
    const auto segs = random_corpus(rng, "abcdef", 100 + rng() % 500, 12);
    const std::size_t n = 1 + rng() % 30;
    const std::size_t m = n + 1 + rng() % 30;
    const auto small = toy::string_merges(train_bpe(segs, byte_cfg(2, 256 + n)).model);
    const auto big = toy::string_merges(train_bpe(segs, byte_cfg(2, 256 + m)).model);
    c.expect(small.size() <= big.size() && std::equal(small.begin(), small.end(), big.begin()),
             "corpus " + std::to_string(i) + " is not a prefix");
  }
  if (c.out.pass) c.out.detail = "50 corpora";
  return c.out;
}

Outcome zero_unreachable_extension() {
  Check c;
  std::mt19937_64 rng(1004);
  int pairs = 0;
  while (pairs < 200) {
    TokenizerModel base = toy::model({"a"}, {});
    if (pairs % 2 == 0) {
      base = train_bpe(random_corpus(rng, "abcd", 200, 8), byte_cfg(1 + rng() % 2, 256 + 5 + rng() % 25)).model;
    } else {
      base = toy::build(toy::random_model(rng, "abcde", 25, false));
    }
    if (!toy::oracle_unreachable(base).empty()) continue;
    ++pairs;
    const auto segs = random_corpus(rng, "abcde", 300, 10);
    const auto ext = continued_extend(base, segs, 1 + rng() % 40, byte_cfg(1 + rng() % 2));
    c.expect(toy::oracle_unreachable(ext.model).empty(), "pair " + std::to_string(pairs) + " has unreachable tokens");
  }
  const auto naive = naive_extend(xy_base(false), kXyzCorpus, 2, NaiveStrategy::Regen, byte_cfg(1));
  const auto naive_unreachable = toy::oracle_unreachable(naive.model).size();
  c.expect(naive_unreachable >= 1, "naive regen on xyz added no unreachable token");
  if (c.out.pass) c.out.detail = "200 pairs, 0 unreachable; naive xyz adds " + std::to_string(naive_unreachable);
  return c.out;
}

Outcome safe_pruning() {
  Check c;
  std::mt19937_64 rng(1005);
  for (int i = 0; i < 200; ++i) {
    const auto m = toy::build(toy::random_model(rng, "abcd", 25));
    const auto stats = collect_stats(m, random_corpus(rng, "abcd", 80, 10));
    std::set<TokenId> unreachable;
    for (const auto& s : toy::oracle_unreachable(m)) unreachable.insert(*m.find(s));
    for (const auto& order : {leaf_frequency_prune_order(m, stats, unreachable), merge_based_prune_order(m, stats)}) {
      const std::size_t k = order.tokens.empty() ? 0 : rng() % (order.tokens.size() + 1);
      c.expect(new_unreachable(m, apply_prune(m, order, k)).empty(),
               std::string(prune_strategy_name(order.strategy)) + " model " + std::to_string(i) + " k " +
                   std::to_string(k));
    }
  }
  const auto toy1 = toy::toy1();
  const auto stats = collect_stats(toy1, {{"abc", 5}, {"ab", 1}, {"c", 1}});
  const auto naive_count = stt(apply_prune(toy1, naive_frequency_prune_order(toy1, stats), 1)).count;
  c.expect(naive_count == 1, "naive TOY1 stt = " + std::to_string(naive_count));
  if (c.out.pass) c.out.detail = "200 models; naive TOY1 stt = 1";
  return c.out;
}

Outcome order_agreement() {
  Check c;
  std::mt19937_64 rng(1006);
  int trees = 0, pairs = 0;
  while (trees < 200) {
    const auto r = toy::random_model(rng, "abcd", 30, false);
    if (has_duplicate_producers(r) || r.merges.empty()) continue;
    ++trees;
    const auto m = toy::build(r);
    const auto stats = collect_stats(m, random_corpus(rng, "abcd", 100, 12));
    const auto leaf = leaf_frequency_prune_order(m, stats);
    const auto merged = merge_based_prune_order(m, stats);
    std::map<TokenId, std::size_t> lp, mp;
    for (std::size_t i = 0; i < leaf.tokens.size(); ++i) lp[leaf.tokens[i]] = i;
    for (std::size_t i = 0; i < merged.tokens.size(); ++i) mp[merged.tokens[i]] = i;
    // ancestors(t): every token reachable through producing-merge operands.
    std::function<void(TokenId, std::set<TokenId>&)> ancestors = [&](TokenId t, std::set<TokenId>& acc) {
      for (const auto& rule : m.merges()) {
        if (rule.result != t) continue;
        for (TokenId op : {rule.left, rule.right}) {
          if (acc.insert(op).second) ancestors(op, acc);
        }
      }
    };
    for (TokenId t = 0; t < m.vocab_size(); ++t) {
      if (!lp.count(t) || !mp.count(t)) continue;
      std::set<TokenId> anc;
      ancestors(t, anc);
      for (TokenId a : anc) {
        if (!lp.count(a) || !mp.count(a)) continue;
        ++pairs;
        const bool leaf_first = lp[t] < lp[a];
        const bool merged_first = mp[t] < mp[a];
        c.expect(leaf_first == merged_first && leaf_first,
                 "tree " + std::to_string(trees) + " disagrees on " + m.token(t) + " / " + m.token(a));
      }
    }
  }
  if (c.out.pass) c.out.detail = "200 trees, " + std::to_string(pairs) + " (token, ancestor) pairs";
  return c.out;
}

Outcome merge_skipping_identity() {
  Check c;
  std::mt19937_64 rng(1007);
  int models = 0;
  while (models < 100) {
    const auto m = toy::build(toy::random_model(rng, "abc", 25, false), true);
    if (stt(m).count != 0) continue;
    ++models;
    std::vector<std::string> docs;
    for (int i = 0; i < 20; ++i) docs.push_back(toy::random_segment(rng, "abc ", 1, 40));
    docs.push_back("abc");
    const auto on = compression(m, docs, true), off = compression(m, docs, false);
    c.expect(on.token_count == off.token_count && on.bytes_per_token == off.bytes_per_token,
             "stt-0 model " + std::to_string(models) + " differs");
  }
  const auto naive = naive_extend(xy_base(true), kXyzCorpus, 2, NaiveStrategy::Regen, byte_cfg(1));
  const std::vector<std::string> held = {"xyz"};
  const double on = compression(naive.model, held, true).bytes_per_token;
  const double off = compression(naive.model, held, false).bytes_per_token;
  c.expect(off < on, "naive xyz: skipping off " + std::to_string(off) + " vs on " + std::to_string(on));
  if (c.out.pass) {
    std::ostringstream s;
    s << "100 stt-0 models equal; naive xyz " << on << " -> " << off << " bytes/token";
    c.out.detail = s.str();
  }
  return c.out;
}

Outcome monotone_compression() {
  Check c;
  std::mt19937_64 rng(1008);
  for (int run = 0; run < 100; ++run) {
    const auto segs = random_corpus(rng, "abcdef", 200 + rng() % 300, 10);
    const auto base = train_bpe(segs, byte_cfg(2, 256 + rng() % 10)).model;
    const auto ext = continued_extend(base, segs, 5 + rng() % 30, byte_cfg(1 + rng() % 2));
    const auto count_with = [&](std::size_t extra) {
      ModelParts p = ext.model.parts();
      p.tokens.resize(base.vocab_size() + extra);
      p.merges.resize(base.merges().size() + extra);
      const TokenizerModel m(p);
      std::uint64_t n = 0;
      for (const auto& [s, f] : segs) n += toy::oracle_tokenize(toy::string_merges(m), s).size() * f;
      return n;
    };
    std::uint64_t prev = count_with(0);
    for (std::size_t i = 1; i <= ext.report.added_tokens.size(); ++i) {
      const std::uint64_t now = count_with(i);
      c.expect(now <= prev, "run " + std::to_string(run) + " grew at merge " + std::to_string(i));
      prev = now;
    }
  }
  if (c.out.pass) c.out.detail = "100 runs";
  return c.out;
}

Outcome fvt() {
  Check c;
  std::mt19937_64 rng(1009);
  std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto old_model = toy::build(toy::random_model(rng, "abcd", 20));
    const auto new_model = toy::build(toy::random_model(rng, "abcd", 20));
    EmbeddingMatrix e(old_model.vocab_size(), 8);
    for (auto& v : e.data) v = dist(rng);
    c.expect(fvt_transfer(old_model, old_model, e) == e, "idempotence broken");
    const auto out = fvt_transfer(old_model, new_model, e);
    const auto merges = toy::string_merges(old_model);
    for (TokenId t = 0; t < new_model.vocab_size(); ++t) {
      const auto row = out.row(t);
      if (const auto old_id = old_model.find(new_model.token(t))) {
        const auto src = e.row(*old_id);
        c.expect(std::equal(row.begin(), row.end(), src.begin()), "copy row not bit-exact");
        continue;
      }
      const auto pieces = toy::oracle_tokenize(merges, new_model.token(t));
      for (std::size_t col = 0; col < e.cols; ++col) {
        long double sum = 0;
        for (const auto& p : pieces) sum += e.row(*old_model.find(p))[col];
        const double diff = std::fabs(static_cast<double>(sum / pieces.size()) - row[col]);
        worst = std::max(worst, diff);
        c.expect(diff <= 1e-6, "mean row off by " + std::to_string(diff));
      }
    }
  }
  if (c.out.pass) {
    std::ostringstream s;
    s << "100 pairs, max mean error " << worst;
    c.out.detail = s.str();
  }
  return c.out;
}

Outcome renyi() {
  Check c;
  const double uniform = renyi_efficiency_from_counts(std::vector<std::uint64_t>(50, 7), 50, {2.5, false});
  const double two = renyi_efficiency_from_counts(std::vector<std::uint64_t>{4, 4, 0, 0}, 4, {2.0, false});
  c.expect(std::fabs(uniform - 1.0) <= 1e-9, "uniform = " + std::to_string(uniform));
  c.expect(std::fabs(two - 0.5) <= 1e-9, "two-token = " + std::to_string(two));
  if (c.out.pass) {
    std::ostringstream s;
    s.precision(12);
    s << "uniform " << uniform << ", two-token " << two;
    c.out.detail = s.str();
  }
  return c.out;
}

// Zipf-distributed words built from random syllables, roughly `bytes` long.
std::vector<std::string> synthetic_corpus(std::size_t bytes) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> syllables = {"ka", "lo", "mi", "ne", "su", "ta", "ri", "vo", "pe", "an", "est",
                                              "ul", "ma", "ke", "ja", "ro", "sen", "tu", "il", "ko", "da", "va"};
  std::vector<std::string> words;
  std::set<std::string> seen;
  while (words.size() < 30000) {
    std::string w;
    for (std::size_t k = 1 + rng() % 4; k > 0; --k) w += syllables[rng() % syllables.size()];
    if (seen.insert(w).second) words.push_back(w);
  }
  std::vector<double> weights(words.size());
  for (std::size_t r = 0; r < weights.size(); ++r) weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), 1.07);
  std::discrete_distribution<std::size_t> zipf(weights.begin(), weights.end());
  const std::vector<std::string> punct = {",", ".", "!", "?", ";", " 42", " 1999", "'s"};

  std::vector<std::string> docs;
  std::size_t total = 0;
  while (total < bytes) {
    std::string line;
    for (std::size_t n = 8 + rng() % 25; n > 0; --n) {
      if (!line.empty()) line += ' ';
      std::string w = words[zipf(rng)];
      if (rng() % 10 == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      line += w;
      if (rng() % 12 == 0) line += punct[rng() % punct.size()];
    }
    total += line.size() + 1;
    docs.push_back(std::move(line));
  }
  return docs;
}

Outcome performance() {
  Check c;
  setenv("TOKFORGE_THREADS", "1", 1);
  const auto docs = synthetic_corpus(10u << 20);
  std::size_t bytes = 0;
  for (const auto& d : docs) bytes += d.size();

  // Base tokenizer trained on a small slice; not timed.
  const std::vector<std::string> slice(docs.begin(), docs.begin() + 2000);
  TrainerConfig cfg = TrainerConfig::defaults(Mode::ByteLevel);
  const TextPipeline pipeline(Mode::ByteLevel, default_normalizer(Mode::ByteLevel),
                              default_pre_tokenizer(Mode::ByteLevel));
  cfg.target_vocab_size = 256 + 300;
  const auto base = train_bpe(count_segments(pipeline, slice), cfg).model;

  const auto t0 = Clock::now();
  const auto segs = count_segments(base.pipeline(), docs);
  const auto ext = continued_extend(base, segs, 1000, TrainerConfig::for_model(base));
  const double extend_secs = seconds_since(t0);
  c.expect(ext.report.added_tokens.size() == 1000, "added only " + std::to_string(ext.report.added_tokens.size()));
  c.expect(extend_secs < 60.0, "extension took " + std::to_string(extend_secs) + " s");

  const auto t1 = Clock::now();
  std::size_t tokens = 0;
  for (const auto& d : docs) tokens += ext.model.tokenize(d).size();
  const double tok_secs = seconds_since(t1);
  const double mb_per_s = static_cast<double>(bytes) / (1 << 20) / tok_secs;
  c.expect(mb_per_s >= 10.0, "tokenization " + std::to_string(mb_per_s) + " MB/s");

  std::ostringstream s;
  s.precision(3);
  s << (static_cast<double>(bytes) / (1 << 20)) << " MB, 1000 merges in " << extend_secs << " s, tokenize "
    << mb_per_s << " MB/s (" << tokens << " tokens), 1 thread";
  if (c.out.pass) c.out.detail = s.str();
  else c.out.detail += " [" + s.str() + "]";
  unsetenv("TOKFORGE_THREADS");
  return c.out;
}

Outcome round_trip() {
  Check c;
  const std::string dir = TOKFORGE_FIXTURE_DIR;
  for (const char* name : {"hf_byte_level", "hf_byte_level_skip", "hf_metaspace", "toy2"}) {
    const auto m = load_tokenizer(dir + "/" + name + ".json");
    const std::string once = to_canonical_json(m);
    c.expect(to_canonical_json(parse_tokenizer_json(once)) == once, std::string(name) + " not byte-identical");
  }
  std::size_t rows = 0;
  for (const char* name : {"hf_byte_level", "hf_byte_level_skip", "hf_metaspace"}) {
    const auto m = load_tokenizer(dir + "/" + name + ".json");
    const auto golden = nlohmann::json::parse(read_file(dir + "/" + name + ".golden.json"));
    for (const auto& row : golden) {
      ++rows;
      c.expect(m.tokenize(row.at("text").get<std::string>()) == row.at("ids").get<std::vector<TokenId>>(),
               std::string(name) + " golden ids differ");
    }
  }
  if (c.out.pass) c.out.detail = "4 files byte-identical, " + std::to_string(rows) + " golden rows";
  return c.out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"tokenizer oracle", tokenizer_oracle},
      {"from-scratch equivalence", from_scratch_equivalence},
      {"prefix consistency", prefix_consistency},
      {"zero-unreachable extension", zero_unreachable_extension},
      {"safe pruning", safe_pruning},
      {"order agreement", order_agreement},
      {"merge-skipping identity", merge_skipping_identity},
      {"monotone training compression", monotone_compression},
      {"fvt", fvt},
      {"renyi efficiency", renyi},
      {"performance", performance},
      {"round-trip", round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
