#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tokforge/model.hpp"

namespace tokforge {

struct SttReport {
  std::set<TokenId> unreachable;
  std::size_t count = 0;
  std::size_t skipped_special = 0;  // special and byte-fallback tokens
};

// Self-Tokenization Test: token t is unreachable when its raw content,
// tokenized without pre-processing and with merge skipping off, is not [t].
SttReport stt(const TokenizerModel& model);

// Tokens unreachable in `after` whose content was reachable (or absent) in
// `before`.
std::set<std::string> stt_delta(const TokenizerModel& before, const TokenizerModel& after);

struct CompressionResult {
  std::uint64_t byte_count = 0;   // raw UTF-8 bytes before normalization
  std::uint64_t token_count = 0;
  double bytes_per_token = 0.0;
};

CompressionResult compression(const TokenizerModel& model, std::span<const std::string> documents,
                              bool merge_skipping);

struct RenyiOptions {
  double alpha = 2.5;
  // Normalize by log of the observed distinct-token count instead of log |V|.
  bool observed_denominator = false;
};

// Token id -> emitted count over the documents.
std::vector<std::uint64_t> token_counts(const TokenizerModel& model, std::span<const std::string> documents,
                                        bool merge_skipping);

double renyi_efficiency(const TokenizerModel& model, std::span<const std::string> documents,
                        const RenyiOptions& options = {}, bool merge_skipping = true);
// Same metric from counts; `vocab_size` is the log-denominator's |V|.
double renyi_efficiency_from_counts(std::span<const std::uint64_t> counts, std::size_t vocab_size,
                                    const RenyiOptions& options = {});

struct UnusedReport {
  std::size_t added = 0;
  std::size_t unused = 0;
  double fraction = 0.0;
  std::vector<TokenId> unused_tokens;
};

// Share of `added` never emitted on the held-out documents. Merge skipping
// follows the model flag unless overridden.
UnusedReport unused_added(const TokenizerModel& model, const std::set<TokenId>& added,
                          std::span<const std::string> heldout, std::optional<bool> merge_skipping = std::nullopt);

// (token, count) sorted by count descending, then id. Without a subset only
// emitted tokens are listed; with one, every member is listed.
std::vector<std::pair<TokenId, std::uint64_t>> frequency_histogram(const TokenizerModel& model,
                                                                   std::span<const std::string> documents,
                                                                   const std::optional<std::set<TokenId>>& subset);

// RFC 4180 field quoting.
std::string csv_field(std::string_view value);

}  // namespace tokforge
