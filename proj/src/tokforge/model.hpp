#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tokforge {

using TokenId = std::uint32_t;

inline constexpr TokenId kNoToken = 0xFFFFFFFFu;

enum class Mode { ByteLevel, SentencePiece };

std::string_view mode_name(Mode mode);

// U+2581, the SentencePiece word-boundary marker.
inline constexpr std::string_view kWordBoundary = "\xE2\x96\x81";

inline constexpr std::string_view kGpt2Pattern =
    R"('s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+)";

struct NormalizerConfig {
  bool nfkc = false;
  bool replace_whitespace = false;  // ' ' -> word-boundary marker
  bool add_prefix = false;          // prepend a marker unless the text starts with one

  static NormalizerConfig identity() { return {}; }
  static NormalizerConfig sentencepiece() { return {true, true, true}; }

  bool operator==(const NormalizerConfig&) const = default;
};

// Metaspace splits before every word-boundary marker and drops nothing.
enum class PreTokenizerKind { Regex, Whitespace, Metaspace, None };

struct PreTokenizerConfig {
  PreTokenizerKind kind = PreTokenizerKind::None;
  std::string pattern;            // Regex only
  bool byte_mapping = false;      // ByteLevel only
  bool add_prefix_space = false;  // ByteLevel only

  static PreTokenizerConfig gpt2() { return {PreTokenizerKind::Regex, std::string(kGpt2Pattern), true, false}; }
  static PreTokenizerConfig whitespace(bool byte_mapping) { return {PreTokenizerKind::Whitespace, {}, byte_mapping, false}; }
  static PreTokenizerConfig metaspace() { return {PreTokenizerKind::Metaspace, {}, false, false}; }

  bool operator==(const PreTokenizerConfig&) const = default;
};

// A merge (left, right) -> result. Its rank is its index in the merge list.
struct MergeRule {
  TokenId left = kNoToken;
  TokenId right = kNoToken;
  TokenId result = kNoToken;

  bool operator==(const MergeRule&) const = default;
};

// Plain data describing a tokenizer. TokenizerModel validates it on
// construction; edit a copy of parts() to derive a modified model.
struct ModelParts {
  Mode mode = Mode::ByteLevel;
  std::vector<std::string> tokens;  // id -> raw content
  std::vector<MergeRule> merges;    // rank order
  std::vector<TokenId> special_tokens;
  std::optional<TokenId> unk_token;
  bool byte_fallback = false;
  bool ignore_merges = false;
  std::optional<std::size_t> max_token_length;
  NormalizerConfig normalizer;
  PreTokenizerConfig pre_tokenizer;

  bool operator==(const ModelParts&) const = default;
};

std::optional<std::size_t> default_max_token_length(Mode mode);
NormalizerConfig default_normalizer(Mode mode);
PreTokenizerConfig default_pre_tokenizer(Mode mode);

class SegmentSplitter;

// Normalization and pre-tokenization, independent of any vocabulary.
class TextPipeline {
 public:
  TextPipeline(Mode mode, NormalizerConfig normalizer, PreTokenizerConfig pre_tokenizer);

  Mode mode() const { return mode_; }

  std::string normalize(std::string_view text) const;

  // Emits the segments of already-normalized text in order.
  void pre_tokenize(std::string_view normalized, const std::function<void(std::string_view)>& emit) const;
  std::vector<std::string> pre_tokenize(std::string_view normalized) const;

  // normalize + pre_tokenize.
  void segment(std::string_view text, const std::function<void(std::string_view)>& emit) const;

 private:
  Mode mode_;
  NormalizerConfig normalizer_;
  PreTokenizerConfig pre_tokenizer_;
  std::shared_ptr<const SegmentSplitter> splitter_;
};

struct MergeEntry {
  std::uint32_t rank;
  TokenId result;
};

// Immutable BPE tokenizer. Safe to share across threads.
class TokenizerModel {
 public:
  explicit TokenizerModel(ModelParts parts);

  const ModelParts& parts() const { return parts_; }
  Mode mode() const { return parts_.mode; }
  std::size_t vocab_size() const { return parts_.tokens.size(); }
  std::span<const MergeRule> merges() const { return parts_.merges; }
  bool ignore_merges() const { return parts_.ignore_merges; }
  const TextPipeline& pipeline() const { return pipeline_; }

  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view content) const;
  bool is_special(TokenId id) const { return id < special_.size() && special_[id]; }
  // Byte-fallback tokens of the form <0xNN>.
  bool is_byte_fallback_token(TokenId id) const;
  std::optional<MergeEntry> merge_for(TokenId left, TokenId right) const;
  // Length in atomic units: bytes in ByteLevel, code points otherwise.
  std::size_t token_units(TokenId id) const;

  std::string normalize(std::string_view text) const { return pipeline_.normalize(text); }
  std::vector<std::string> pre_tokenize(std::string_view normalized) const { return pipeline_.pre_tokenize(normalized); }

  // Splits a segment into atomic token ids (unknown atoms map to the
  // byte-fallback tokens or the unknown token, else throw UnknownAtom).
  void atomize(std::string_view segment, std::vector<TokenId>& out) const;

  std::vector<TokenId> tokenize_segment(std::string_view segment, bool allow_merge_skipping) const;

  // Appends the tokens of one segment to `out`. When `fired_ranks` is given,
  // the rank of every merge application is appended to it.
  void tokenize_segment_into(std::string_view segment, bool allow_merge_skipping, std::vector<TokenId>& out,
                             std::vector<std::uint32_t>* fired_ranks = nullptr) const;

  std::vector<TokenId> tokenize(std::string_view text, bool allow_merge_skipping = true) const;

  std::string decode(std::span<const TokenId> ids) const;

 private:
  void validate_and_index();
  void merge_segment(std::string_view segment, std::vector<TokenId>& out,
                     std::vector<std::uint32_t>* fired_ranks) const;

  // Distinguishes model contents for the per-thread segment cache; copies
  // share it because their contents are identical.
  std::uint64_t instance_id_ = 0;
  ModelParts parts_;
  TextPipeline pipeline_;
  std::unordered_map<std::string, TokenId> ids_;
  std::unordered_map<std::uint64_t, MergeEntry> merge_index_;
  std::array<TokenId, 256> byte_atoms_{};
  std::array<TokenId, 256> fallback_atoms_{};
  std::vector<bool> special_;
  std::vector<std::uint32_t> units_;
};

inline std::uint64_t pair_key(TokenId left, TokenId right) {
  return (static_cast<std::uint64_t>(left) << 32) | right;
}
inline TokenId pair_left(std::uint64_t key) { return static_cast<TokenId>(key >> 32); }
inline TokenId pair_right(std::uint64_t key) { return static_cast<TokenId>(key & 0xFFFFFFFFu); }

}  // namespace tokforge
