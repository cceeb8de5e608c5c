#include "tokforge/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "tokforge/error.hpp"
#include "tokforge/parallel.hpp"
#include "tokforge/unicode.hpp"

namespace tokforge {

namespace {

class LineReader {
 public:
  explicit LineReader(const std::string& path) {
    file_ = path == "-" ? gzdopen(0, "rb") : gzopen(path.c_str(), "rb");
    if (file_ == nullptr) throw Error(ErrorCode::Io, "cannot open corpus " + path);
  }
  ~LineReader() {
    if (file_ != nullptr) gzclose(file_);
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[1 << 16];
    bool any = false;
    while (gzgets(file_, buf, sizeof(buf)) != nullptr) {
      any = true;
      line += buf;
      if (!line.empty() && line.back() == '\n') break;
    }
    if (!any) return false;
    if (!line.empty() && line.back() == '\n') line.pop_back();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

 private:
  gzFile file_ = nullptr;
};

void read_raw_documents(const CorpusSource& source, const std::function<bool(std::string&&)>& emit) {
  LineReader reader(source.path);
  std::string line;
  std::size_t line_no = 0;
  while (reader.next(line)) {
    ++line_no;
    if (source.format == CorpusFormat::PlainLines) {
      if (!emit(std::move(line))) return;
      continue;
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, source.path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
      throw Error(ErrorCode::Format, source.path + ":" + std::to_string(line_no) + ": missing \"text\" field");
    }
    if (!emit(doc["text"].get<std::string>())) return;
  }
}

}  // namespace

void stream_documents(const CorpusSource& source, const std::function<void(std::string_view)>& emit) {
  std::uint64_t consumed = 0;
  const auto within_budget = [&](std::string_view doc) {
    if (source.budget_chars && consumed >= *source.budget_chars) return false;
    consumed += unicode::length(doc);
    emit(doc);
    return true;
  };

  if (source.seed == 0) {
    read_raw_documents(source, [&](std::string&& doc) { return within_budget(doc); });
    return;
  }

  std::vector<std::string> docs;
  read_raw_documents(source, [&](std::string&& doc) {
    docs.push_back(std::move(doc));
    return true;
  });
  std::mt19937_64 rng(source.seed);
  std::shuffle(docs.begin(), docs.end(), rng);
  for (const auto& doc : docs) {
    if (!within_budget(doc)) break;
  }
}

std::vector<std::string> read_documents(const CorpusSource& source) {
  std::vector<std::string> docs;
  stream_documents(source, [&](std::string_view doc) { docs.emplace_back(doc); });
  return docs;
}

namespace {

using CountMap = std::unordered_map<std::string, std::uint64_t>;

SegmentCounts to_sorted(CountMap&& map) {
  SegmentCounts out;
  out.reserve(map.size());
  for (auto& [seg, n] : map) out.emplace_back(seg, n);
  std::sort(out.begin(), out.end());
  return out;
}

void merge_into(CountMap& total, CountMap&& part) {
  if (total.size() < part.size()) std::swap(total, part);
  for (auto& [seg, n] : part) total[seg] += n;
}

}  // namespace

SegmentCounts count_segments(const TextPipeline& pipeline, std::span<const std::string> documents) {
  auto counts = parallel_map_reduce<CountMap>(
      documents.size(),
      [&](CountMap& acc, std::size_t begin, std::size_t end) {
        std::string key;
        for (std::size_t i = begin; i < end; ++i) {
          pipeline.segment(documents[i], [&](std::string_view seg) {
            key.assign(seg);
            ++acc[key];
          });
        }
      },
      merge_into);
  return to_sorted(std::move(counts));
}

SegmentCounts count_segments(std::span<const std::string> segments) {
  CountMap counts;
  for (const auto& seg : segments) {
    if (!seg.empty()) ++counts[seg];
  }
  return to_sorted(std::move(counts));
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(static_cast<unsigned long>(std::hash<std::string>{}(path) & 0xFFFF));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot rename onto " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tokforge
