#include "tokforge/model.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <queue>

#include "tokforge/error.hpp"
#include "tokforge/pretokenizer.hpp"
#include "tokforge/unicode.hpp"

namespace tokforge {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "FormatError";
    case ErrorCode::UnsupportedModel: return "UnsupportedModel";
    case ErrorCode::InconsistentModel: return "InconsistentModel";
    case ErrorCode::UnknownAtom: return "UnknownAtom";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::TargetTooSmall: return "TargetTooSmall";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::UntokenizableNewToken: return "UntokenizableNewToken";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NotALeaf: return "NotALeaf";
  }
  return "Unknown";
}

std::string_view mode_name(Mode mode) {
  return mode == Mode::ByteLevel ? "byte_level" : "sentencepiece";
}

std::optional<std::size_t> default_max_token_length(Mode mode) {
  if (mode == Mode::SentencePiece) return 16;
  return std::nullopt;
}

NormalizerConfig default_normalizer(Mode mode) {
  return mode == Mode::SentencePiece ? NormalizerConfig::sentencepiece() : NormalizerConfig::identity();
}

PreTokenizerConfig default_pre_tokenizer(Mode mode) {
  return mode == Mode::SentencePiece ? PreTokenizerConfig::metaspace() : PreTokenizerConfig::gpt2();
}

// --- TextPipeline ----------------------------------------------------------

TextPipeline::TextPipeline(Mode mode, NormalizerConfig normalizer, PreTokenizerConfig pre_tokenizer)
    : mode_(mode),
      normalizer_(normalizer),
      pre_tokenizer_(std::move(pre_tokenizer)),
      splitter_(make_splitter(mode, pre_tokenizer_)) {}

std::string TextPipeline::normalize(std::string_view text) const {
  std::string out = normalizer_.nfkc ? unicode::nfkc(text) : std::string(text);
  if (normalizer_.replace_whitespace && out.find(' ') != std::string::npos) {
    std::string replaced;
    replaced.reserve(out.size() + 8);
    for (char c : out) {
      if (c == ' ') {
        replaced.append(kWordBoundary);
      } else {
        replaced.push_back(c);
      }
    }
    out = std::move(replaced);
  }
  if (normalizer_.add_prefix && !out.empty() && !out.starts_with(kWordBoundary)) out.insert(0, kWordBoundary);
  return out;
}

void TextPipeline::pre_tokenize(std::string_view normalized,
                                const std::function<void(std::string_view)>& emit) const {
  if (mode_ == Mode::ByteLevel && pre_tokenizer_.add_prefix_space && !normalized.empty() &&
      normalized.front() != ' ') {
    const std::string prefixed = " " + std::string(normalized);
    splitter_->split(prefixed, emit);
    return;
  }
  splitter_->split(normalized, emit);
}

std::vector<std::string> TextPipeline::pre_tokenize(std::string_view normalized) const {
  std::vector<std::string> out;
  pre_tokenize(normalized, [&](std::string_view seg) { out.emplace_back(seg); });
  return out;
}

void TextPipeline::segment(std::string_view text, const std::function<void(std::string_view)>& emit) const {
  if (normalizer_ == NormalizerConfig::identity()) {
    pre_tokenize(text, emit);
    return;
  }
  const std::string normalized = normalize(text);
  pre_tokenize(normalized, emit);
}

// --- TokenizerModel --------------------------------------------------------

namespace {

std::optional<unsigned char> parse_byte_fallback(std::string_view token) {
  // <0xNN>
  if (token.size() != 6 || token.substr(0, 3) != "<0x" || token.back() != '>') return std::nullopt;
  unsigned value = 0;
  for (std::size_t i = 3; i < 5; ++i) {
    const char c = token[i];
    value <<= 4;
    if (c >= '0' && c <= '9') {
      value |= static_cast<unsigned>(c - '0');
    } else if (c >= 'A' && c <= 'F') {
      value |= static_cast<unsigned>(c - 'A' + 10);
    } else if (c >= 'a' && c <= 'f') {
      value |= static_cast<unsigned>(c - 'a' + 10);
    } else {
      return std::nullopt;
    }
  }
  return static_cast<unsigned char>(value);
}

std::uint64_t next_instance_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace

TokenizerModel::TokenizerModel(ModelParts parts)
    : instance_id_(next_instance_id()),
      parts_(std::move(parts)),
      pipeline_(parts_.mode, parts_.normalizer, parts_.pre_tokenizer) {
  validate_and_index();
}

void TokenizerModel::validate_and_index() {
  const std::size_t n = parts_.tokens.size();
  ids_.reserve(n * 2);
  units_.resize(n);
  byte_atoms_.fill(kNoToken);
  fallback_atoms_.fill(kNoToken);
  for (TokenId id = 0; id < n; ++id) {
    const std::string& content = parts_.tokens[id];
    if (content.empty()) throw Error(ErrorCode::InconsistentModel, "empty token at id " + std::to_string(id));
    if (!ids_.emplace(content, id).second) {
      throw Error(ErrorCode::InconsistentModel, "duplicate token content at id " + std::to_string(id));
    }
    units_[id] = static_cast<std::uint32_t>(parts_.mode == Mode::ByteLevel ? content.size()
                                                                           : unicode::length(content));
    if (content.size() == 1) byte_atoms_[static_cast<unsigned char>(content[0])] = id;
    if (parts_.byte_fallback) {
      if (const auto b = parse_byte_fallback(content)) fallback_atoms_[*b] = id;
    }
  }

  special_.assign(n, false);
  for (TokenId id : parts_.special_tokens) {
    if (id >= n) throw Error(ErrorCode::InconsistentModel, "special token id out of range");
    special_[id] = true;
  }
  if (parts_.unk_token && *parts_.unk_token >= n) {
    throw Error(ErrorCode::InconsistentModel, "unknown-token id out of range");
  }

  merge_index_.reserve(parts_.merges.size() * 2);
  for (std::uint32_t rank = 0; rank < parts_.merges.size(); ++rank) {
    const MergeRule& m = parts_.merges[rank];
    if (m.left >= n || m.right >= n || m.result >= n) {
      throw Error(ErrorCode::InconsistentModel, "merge " + std::to_string(rank) + " references a missing token");
    }
    const std::string& l = parts_.tokens[m.left];
    const std::string& r = parts_.tokens[m.right];
    const std::string& out = parts_.tokens[m.result];
    if (out.size() != l.size() + r.size() || out.compare(0, l.size(), l) != 0 ||
        out.compare(l.size(), r.size(), r) != 0) {
      throw Error(ErrorCode::InconsistentModel,
                  "merge " + std::to_string(rank) + " result is not the concatenation of its operands");
    }
    merge_index_.emplace(pair_key(m.left, m.right), MergeEntry{rank, m.result});
  }
}

const std::string& TokenizerModel::token(TokenId id) const {
  if (id >= parts_.tokens.size()) throw Error(ErrorCode::UnknownId, "unknown token id " + std::to_string(id));
  return parts_.tokens[id];
}

std::optional<TokenId> TokenizerModel::find(std::string_view content) const {
  const auto it = ids_.find(std::string(content));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

bool TokenizerModel::is_byte_fallback_token(TokenId id) const {
  return parts_.byte_fallback && id < parts_.tokens.size() && parse_byte_fallback(parts_.tokens[id]).has_value() &&
         fallback_atoms_[*parse_byte_fallback(parts_.tokens[id])] == id;
}

std::optional<MergeEntry> TokenizerModel::merge_for(TokenId left, TokenId right) const {
  const auto it = merge_index_.find(pair_key(left, right));
  if (it == merge_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TokenizerModel::token_units(TokenId id) const {
  if (id >= units_.size()) throw Error(ErrorCode::UnknownId, "unknown token id " + std::to_string(id));
  return units_[id];
}

void TokenizerModel::atomize(std::string_view segment, std::vector<TokenId>& out) const {
  const auto unknown = [&](std::string_view what) {
    if (parts_.unk_token) {
      out.push_back(*parts_.unk_token);
      return;
    }
    throw Error(ErrorCode::UnknownAtom, "no atomic token for \"" + std::string(what) + "\"");
  };

  if (parts_.mode == Mode::ByteLevel) {
    for (std::size_t i = 0; i < segment.size(); ++i) {
      const TokenId id = byte_atoms_[static_cast<unsigned char>(segment[i])];
      if (id == kNoToken) {
        char hex[8];
        std::snprintf(hex, sizeof(hex), "0x%02X", static_cast<unsigned char>(segment[i]));
        unknown(hex);
      } else {
        out.push_back(id);
      }
    }
    return;
  }

  std::string scratch;
  for (std::size_t pos = 0; pos < segment.size();) {
    const std::size_t len = unicode::char_length(segment, pos);
    const std::string_view ch = segment.substr(pos, len);
    TokenId id = kNoToken;
    if (len == 1) {
      id = byte_atoms_[static_cast<unsigned char>(ch[0])];
    } else {
      scratch.assign(ch);
      const auto it = ids_.find(scratch);
      if (it != ids_.end()) id = it->second;
    }
    if (id != kNoToken) {
      out.push_back(id);
    } else if (parts_.byte_fallback) {
      for (char b : ch) {
        const TokenId fb = fallback_atoms_[static_cast<unsigned char>(b)];
        if (fb == kNoToken) {
          unknown(ch);
        } else {
          out.push_back(fb);
        }
      }
    } else {
      unknown(ch);
    }
    pos += len;
  }
}

namespace {

struct Candidate {
  std::uint32_t rank;
  std::uint32_t pos;
  TokenId left;
  TokenId right;
  TokenId result;

  // Min-heap on (rank, pos): lowest rank first, leftmost among equals.
  bool operator>(const Candidate& other) const {
    return rank != other.rank ? rank > other.rank : pos > other.pos;
  }
};

struct Workspace {
  std::vector<TokenId> symbols;
  std::vector<std::int32_t> next;
  std::vector<std::int32_t> prev;
  std::vector<Candidate> heap;
};

// Recently merged segments of one model, per thread. Short segments repeat
// heavily in natural text.
struct SegmentCache {
  static constexpr std::size_t kMaxEntries = 1 << 16;
  static constexpr std::size_t kMaxSegmentBytes = 64;
  std::uint64_t model = 0;
  std::unordered_map<std::string, std::vector<TokenId>> entries;
};

}  // namespace

void TokenizerModel::tokenize_segment_into(std::string_view segment, bool allow_merge_skipping,
                                           std::vector<TokenId>& out,
                                           std::vector<std::uint32_t>* fired_ranks) const {
  if (segment.empty()) return;
  if (allow_merge_skipping && parts_.ignore_merges) {
    if (const auto id = find(segment)) {
      out.push_back(*id);
      return;
    }
  }

  if (fired_ranks || segment.size() > SegmentCache::kMaxSegmentBytes) {
    merge_segment(segment, out, fired_ranks);
    return;
  }
  thread_local SegmentCache cache;
  if (cache.model != instance_id_) {
    cache.entries.clear();
    cache.model = instance_id_;
  }
  thread_local std::string key;
  key.assign(segment);
  if (const auto it = cache.entries.find(key); it != cache.entries.end()) {
    out.insert(out.end(), it->second.begin(), it->second.end());
    return;
  }
  const std::size_t start = out.size();
  merge_segment(segment, out, nullptr);
  if (cache.entries.size() >= SegmentCache::kMaxEntries) cache.entries.clear();
  cache.entries.emplace(key, std::vector<TokenId>(out.begin() + static_cast<std::ptrdiff_t>(start), out.end()));
}

void TokenizerModel::merge_segment(std::string_view segment, std::vector<TokenId>& out,
                                   std::vector<std::uint32_t>* fired_ranks) const {
  thread_local Workspace ws;
  auto& sym = ws.symbols;
  sym.clear();
  atomize(segment, sym);
  const auto count = static_cast<std::int32_t>(sym.size());
  if (count < 2 || merge_index_.empty()) {
    out.insert(out.end(), sym.begin(), sym.end());
    return;
  }

  auto& next = ws.next;
  auto& prev = ws.prev;
  next.resize(sym.size());
  prev.resize(sym.size());
  for (std::int32_t i = 0; i < count; ++i) {
    next[i] = i + 1 < count ? i + 1 : -1;
    prev[i] = i - 1;
  }

  auto& heap = ws.heap;
  heap.clear();
  const auto greater = std::greater<Candidate>();
  const auto push = [&](std::int32_t pos) {
    if (pos < 0) return;
    const std::int32_t r = next[pos];
    if (r < 0) return;
    const auto it = merge_index_.find(pair_key(sym[pos], sym[r]));
    if (it == merge_index_.end()) return;
    heap.push_back({it->second.rank, static_cast<std::uint32_t>(pos), sym[pos], sym[r], it->second.result});
    std::push_heap(heap.begin(), heap.end(), greater);
  };
  for (std::int32_t i = 0; i + 1 < count; ++i) push(i);

  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), greater);
    const Candidate c = heap.back();
    heap.pop_back();
    const auto pos = static_cast<std::int32_t>(c.pos);
    const std::int32_t r = next[pos];
    if (sym[pos] != c.left || r < 0 || sym[r] != c.right) continue;

    sym[pos] = c.result;
    sym[r] = kNoToken;
    next[pos] = next[r];
    if (next[r] >= 0) prev[next[r]] = pos;
    if (fired_ranks) fired_ranks->push_back(c.rank);
    push(prev[pos]);
    push(pos);
  }

  for (std::int32_t i = 0; i >= 0; i = next[i]) out.push_back(sym[i]);
}

std::vector<TokenId> TokenizerModel::tokenize_segment(std::string_view segment, bool allow_merge_skipping) const {
  std::vector<TokenId> out;
  tokenize_segment_into(segment, allow_merge_skipping, out);
  return out;
}

std::vector<TokenId> TokenizerModel::tokenize(std::string_view text, bool allow_merge_skipping) const {
  std::vector<TokenId> out;
  pipeline_.segment(text, [&](std::string_view seg) { tokenize_segment_into(seg, allow_merge_skipping, out); });
  return out;
}

std::string TokenizerModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= parts_.tokens.size()) throw Error(ErrorCode::UnknownId, "unknown token id " + std::to_string(id));
    const std::string& content = parts_.tokens[id];
    if (parts_.byte_fallback) {
      if (const auto b = parse_byte_fallback(content); b && fallback_atoms_[*b] == id) {
        out.push_back(static_cast<char>(*b));
        continue;
      }
    }
    out += content;
  }
  if (parts_.normalizer.replace_whitespace || parts_.normalizer.add_prefix) {
    std::string restored;
    restored.reserve(out.size());
    for (std::size_t pos = 0; pos < out.size();) {
      if (out.compare(pos, kWordBoundary.size(), kWordBoundary) == 0) {
        restored.push_back(' ');
        pos += kWordBoundary.size();
      } else {
        restored.push_back(out[pos++]);
      }
    }
    out = std::move(restored);
    if (parts_.normalizer.add_prefix && !out.empty() && out.front() == ' ') out.erase(0, 1);
  }
  return out;
}

}  // namespace tokforge
