#include "tokforge/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "tokforge/error.hpp"
#include "tokforge/parallel.hpp"

namespace tokforge {

namespace {

struct SttAcc {
  std::vector<TokenId> unreachable;
  std::size_t skipped = 0;
};

bool self_tokenizes(const TokenizerModel& model, TokenId id, std::vector<TokenId>& scratch) {
  scratch.clear();
  try {
    model.tokenize_segment_into(model.token(id), false, scratch);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnknownAtom) return false;
    throw;
  }
  return scratch.size() == 1 && scratch[0] == id;
}

}  // namespace

SttReport stt(const TokenizerModel& model) {
  auto acc = parallel_map_reduce<SttAcc>(
      model.vocab_size(),
      [&](SttAcc& a, std::size_t begin, std::size_t end) {
        std::vector<TokenId> scratch;
        for (auto id = static_cast<TokenId>(begin); id < end; ++id) {
          if (model.is_special(id) || model.is_byte_fallback_token(id)) {
            ++a.skipped;
          } else if (!self_tokenizes(model, id, scratch)) {
            a.unreachable.push_back(id);
          }
        }
      },
      [](SttAcc& total, SttAcc&& part) {
        total.unreachable.insert(total.unreachable.end(), part.unreachable.begin(), part.unreachable.end());
        total.skipped += part.skipped;
      },
      1024);
  SttReport report;
  report.unreachable.insert(acc.unreachable.begin(), acc.unreachable.end());
  report.count = report.unreachable.size();
  report.skipped_special = acc.skipped;
  return report;
}

std::set<std::string> stt_delta(const TokenizerModel& before, const TokenizerModel& after) {
  std::set<std::string> was;
  for (TokenId t : stt(before).unreachable) was.insert(before.token(t));
  std::set<std::string> out;
  for (TokenId t : stt(after).unreachable) {
    if (!was.count(after.token(t))) out.insert(after.token(t));
  }
  return out;
}

namespace {

struct Totals {
  std::uint64_t bytes = 0;
  std::uint64_t tokens = 0;
};

}  // namespace

CompressionResult compression(const TokenizerModel& model, std::span<const std::string> documents,
                              bool merge_skipping) {
  const auto totals = parallel_map_reduce<Totals>(
      documents.size(),
      [&](Totals& t, std::size_t begin, std::size_t end) {
        std::vector<TokenId> ids;
        for (std::size_t i = begin; i < end; ++i) {
          t.bytes += documents[i].size();
          ids.clear();
          model.pipeline().segment(documents[i],
                                   [&](std::string_view seg) { model.tokenize_segment_into(seg, merge_skipping, ids); });
          t.tokens += ids.size();
        }
      },
      [](Totals& total, Totals&& part) {
        total.bytes += part.bytes;
        total.tokens += part.tokens;
      });
  if (totals.tokens == 0) throw Error(ErrorCode::EmptyCorpus, "corpus produced no tokens");
  return {totals.bytes, totals.tokens, static_cast<double>(totals.bytes) / static_cast<double>(totals.tokens)};
}

std::vector<std::uint64_t> token_counts(const TokenizerModel& model, std::span<const std::string> documents,
                                        bool merge_skipping) {
  const std::size_t n = model.vocab_size();
  auto counts = parallel_map_reduce<std::vector<std::uint64_t>>(
      documents.size(),
      [&](std::vector<std::uint64_t>& acc, std::size_t begin, std::size_t end) {
        acc.assign(n, 0);
        std::vector<TokenId> ids;
        for (std::size_t i = begin; i < end; ++i) {
          ids.clear();
          model.pipeline().segment(documents[i],
                                   [&](std::string_view seg) { model.tokenize_segment_into(seg, merge_skipping, ids); });
          for (TokenId id : ids) ++acc[id];
        }
      },
      [](std::vector<std::uint64_t>& total, std::vector<std::uint64_t>&& part) {
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += part[i];
      });
  counts.resize(n, 0);
  return counts;
}

double renyi_efficiency_from_counts(std::span<const std::uint64_t> counts, std::size_t vocab_size,
                                    const RenyiOptions& options) {
  const double alpha = options.alpha;
  if (!std::isfinite(alpha) || alpha < 0.0 || alpha == 1.0) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be finite, non-negative and different from 1");
  }
  std::uint64_t total = 0;
  std::size_t distinct = 0;
  for (std::uint64_t c : counts) {
    total += c;
    if (c > 0) ++distinct;
  }
  if (total == 0) throw Error(ErrorCode::EmptyCorpus, "corpus produced no tokens");
  if (distinct <= 1) throw Error(ErrorCode::DegenerateDistribution, "a single distinct token was emitted");
  const std::size_t support = options.observed_denominator ? distinct : vocab_size;
  if (support <= 1) throw Error(ErrorCode::DegenerateDistribution, "vocabulary of size one");

  double sum = 0.0;
  const double n = static_cast<double>(total);
  for (std::uint64_t c : counts) {
    if (c > 0) sum += std::pow(static_cast<double>(c) / n, alpha);
  }
  const double entropy = std::log(sum) / (1.0 - alpha);
  return entropy / std::log(static_cast<double>(support));
}

double renyi_efficiency(const TokenizerModel& model, std::span<const std::string> documents,
                        const RenyiOptions& options, bool merge_skipping) {
  const auto counts = token_counts(model, documents, merge_skipping);
  return renyi_efficiency_from_counts(counts, model.vocab_size(), options);
}

UnusedReport unused_added(const TokenizerModel& model, const std::set<TokenId>& added,
                          std::span<const std::string> heldout, std::optional<bool> merge_skipping) {
  if (added.empty()) throw Error(ErrorCode::EmptySet, "no added tokens given");
  for (TokenId t : added) {
    if (t >= model.vocab_size()) throw Error(ErrorCode::UnknownId, "added token id " + std::to_string(t));
  }
  const auto counts = token_counts(model, heldout, merge_skipping.value_or(model.ignore_merges()));
  UnusedReport report;
  report.added = added.size();
  for (TokenId t : added) {
    if (counts[t] == 0) report.unused_tokens.push_back(t);
  }
  report.unused = report.unused_tokens.size();
  report.fraction = static_cast<double>(report.unused) / static_cast<double>(report.added);
  return report;
}

std::vector<std::pair<TokenId, std::uint64_t>> frequency_histogram(const TokenizerModel& model,
                                                                   std::span<const std::string> documents,
                                                                   const std::optional<std::set<TokenId>>& subset) {
  const auto counts = token_counts(model, documents, true);
  std::vector<std::pair<TokenId, std::uint64_t>> rows;
  if (subset) {
    for (TokenId t : *subset) {
      if (t >= counts.size()) throw Error(ErrorCode::UnknownId, "subset token id " + std::to_string(t));
      rows.emplace_back(t, counts[t]);
    }
  } else {
    for (TokenId t = 0; t < counts.size(); ++t) {
      if (counts[t] > 0) rows.emplace_back(t, counts[t]);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return rows;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace tokforge
