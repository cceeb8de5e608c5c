#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokforge/model.hpp"

namespace tokforge {

enum class CorpusFormat { PlainLines, JsonLines };

struct CorpusSource {
  std::string path;  // "-" reads stdin; a ".gz" suffix reads gzip
  CorpusFormat format = CorpusFormat::PlainLines;
  std::optional<std::uint64_t> budget_chars;
  // 0 keeps file order; any other value shuffles documents with this seed
  // before the budget is applied.
  std::uint64_t seed = 0;
};

// Streams documents in deterministic order. The budget counts code points and
// stops after the document that crosses it.
void stream_documents(const CorpusSource& source, const std::function<void(std::string_view)>& emit);
std::vector<std::string> read_documents(const CorpusSource& source);

// Unique segments with their frequencies, sorted by segment bytes.
using SegmentCounts = std::vector<std::pair<std::string, std::uint64_t>>;

SegmentCounts count_segments(const TextPipeline& pipeline, std::span<const std::string> documents);
SegmentCounts count_segments(std::span<const std::string> segments);

// Writes to a temporary sibling and renames over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace tokforge
