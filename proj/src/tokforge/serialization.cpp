#include "tokforge/serialization.hpp"

#include <cmath>
#include <cstring>
#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "tokforge/corpus.hpp"
#include "tokforge/error.hpp"
#include "tokforge/unicode.hpp"

namespace tokforge {

using nlohmann::json;

namespace {

constexpr std::string_view kFormatVersion = "1";

[[noreturn]] void format_error(const std::string& message) { throw Error(ErrorCode::Format, message); }
[[noreturn]] void unsupported(const std::string& message) { throw Error(ErrorCode::UnsupportedModel, message); }

std::string encode_token(Mode mode, std::string_view raw) {
  return mode == Mode::ByteLevel ? unicode::bytes_to_units(raw) : std::string(raw);
}

std::string decode_token(Mode mode, const std::string& stored) {
  if (mode != Mode::ByteLevel) return stored;
  auto raw = unicode::units_to_bytes(stored);
  if (!raw) format_error("token \"" + stored + "\" is not a byte-level mapped string");
  return std::move(*raw);
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return fallback;
  if (!obj[key].is_boolean()) format_error(std::string("field \"") + key + "\" must be a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
    format_error(std::string("missing string field \"") + key + "\"");
  }
  return obj[key].get<std::string>();
}

std::pair<std::string, std::string> parse_merge_entry(const json& entry) {
  if (entry.is_string()) {
    const auto text = entry.get<std::string>();
    const auto space = text.find(' ');
    if (space == std::string::npos || text.find(' ', space + 1) != std::string::npos) {
      format_error("merge \"" + text + "\" is not of the form \"left right\"");
    }
    return {text.substr(0, space), text.substr(space + 1)};
  }
  if (entry.is_array() && entry.size() == 2 && entry[0].is_string() && entry[1].is_string()) {
    return {entry[0].get<std::string>(), entry[1].get<std::string>()};
  }
  format_error("merge entries must be \"left right\" strings or [left, right] pairs");
}

// Resolves stored merges against the (raw) vocabulary.
std::vector<MergeRule> resolve_merges(const json& merges, Mode mode, const std::vector<std::string>& tokens) {
  std::unordered_map<std::string, TokenId> ids;
  ids.reserve(tokens.size() * 2);
  for (TokenId id = 0; id < tokens.size(); ++id) ids.emplace(tokens[id], id);
  const auto lookup = [&](const std::string& raw, std::size_t rank) {
    const auto it = ids.find(raw);
    if (it == ids.end()) {
      throw Error(ErrorCode::InconsistentModel,
                  "merge " + std::to_string(rank) + " references a token missing from the vocabulary");
    }
    return it->second;
  };

  if (!merges.is_array()) format_error("model.merges must be an array");
  std::vector<MergeRule> out;
  out.reserve(merges.size());
  for (std::size_t rank = 0; rank < merges.size(); ++rank) {
    auto [left, right] = parse_merge_entry(merges[rank]);
    const std::string l = decode_token(mode, left);
    const std::string r = decode_token(mode, right);
    out.push_back({lookup(l, rank), lookup(r, rank), lookup(l + r, rank)});
  }
  return out;
}

std::vector<std::string> collect_vocab(const json& vocab, Mode mode, std::map<TokenId, std::string> extra) {
  if (!vocab.is_object()) format_error("model.vocab must be an object");
  std::map<TokenId, std::string> by_id = std::move(extra);
  for (const auto& [key, value] : vocab.items()) {
    if (!value.is_number_unsigned()) format_error("vocab ids must be unsigned integers");
    const auto id = value.get<TokenId>();
    std::string raw = decode_token(mode, key);
    const auto [it, inserted] = by_id.emplace(id, raw);
    if (!inserted && it->second != raw) format_error("token id " + std::to_string(id) + " is assigned twice");
  }
  std::vector<std::string> tokens;
  tokens.reserve(by_id.size());
  for (const auto& [id, raw] : by_id) {
    if (id != tokens.size()) format_error("token ids are not contiguous (missing id " + std::to_string(tokens.size()) + ")");
    tokens.push_back(raw);
  }
  return tokens;
}

// --- canonical format ------------------------------------------------------

TokenizerModel parse_canonical(const json& doc) {
  if (get_string(doc, "version") != kFormatVersion) unsupported("unsupported tokenizer file version");
  const std::string mode_text = get_string(doc, "mode");
  Mode mode;
  if (mode_text == "byte_level") {
    mode = Mode::ByteLevel;
  } else if (mode_text == "sentencepiece") {
    mode = Mode::SentencePiece;
  } else {
    unsupported("unknown mode \"" + mode_text + "\"");
  }

  const json& model = doc.at("model");
  if (get_string(model, "type") != "BPE") unsupported("unsupported model type \"" + get_string(model, "type") + "\"");

  ModelParts parts;
  parts.mode = mode;
  parts.tokens = collect_vocab(model.at("vocab"), mode, {});
  parts.merges = resolve_merges(model.at("merges"), mode, parts.tokens);
  parts.ignore_merges = get_bool(model, "ignore_merges", false);
  parts.byte_fallback = get_bool(model, "byte_fallback", false);
  if (model.contains("unk_token") && !model["unk_token"].is_null()) {
    const std::string raw = decode_token(mode, model["unk_token"].get<std::string>());
    const auto it = std::find(parts.tokens.begin(), parts.tokens.end(), raw);
    if (it == parts.tokens.end()) throw Error(ErrorCode::InconsistentModel, "unk_token is not in the vocabulary");
    parts.unk_token = static_cast<TokenId>(it - parts.tokens.begin());
  }
  if (model.contains("max_token_length") && !model["max_token_length"].is_null()) {
    parts.max_token_length = model["max_token_length"].get<std::size_t>();
  }

  const json& norm = doc.at("normalizer");
  parts.normalizer.nfkc = get_bool(norm, "nfkc", false);
  parts.normalizer.replace_whitespace = get_bool(norm, "replace_whitespace", false);
  parts.normalizer.add_prefix = get_bool(norm, "add_prefix", false);

  const json& pre = doc.at("pre_tokenizer");
  const std::string kind = get_string(pre, "type");
  if (kind == "Regex") {
    parts.pre_tokenizer.kind = PreTokenizerKind::Regex;
    parts.pre_tokenizer.pattern = get_string(pre, "pattern");
  } else if (kind == "Whitespace") {
    parts.pre_tokenizer.kind = PreTokenizerKind::Whitespace;
  } else if (kind == "Metaspace") {
    parts.pre_tokenizer.kind = PreTokenizerKind::Metaspace;
  } else if (kind == "None") {
    parts.pre_tokenizer.kind = PreTokenizerKind::None;
  } else {
    unsupported("unknown pre_tokenizer type \"" + kind + "\"");
  }
  parts.pre_tokenizer.byte_mapping = get_bool(pre, "byte_mapping", mode == Mode::ByteLevel);
  parts.pre_tokenizer.add_prefix_space = get_bool(pre, "add_prefix_space", false);
  if (parts.pre_tokenizer.byte_mapping != (mode == Mode::ByteLevel)) {
    format_error("pre_tokenizer.byte_mapping must be true exactly in byte_level mode");
  }

  for (const auto& id : doc.at("special_tokens")) {
    parts.special_tokens.push_back(id.get<TokenId>());
  }
  return TokenizerModel(std::move(parts));
}

// --- tokenizer-JSON import -------------------------------------------------

bool mentions_type(const json& node, std::string_view type) {
  if (node.is_object()) {
    if (node.contains("type") && node["type"].is_string() && node["type"].get<std::string>() == type) return true;
    for (const auto& [key, value] : node.items()) {
      if (mentions_type(value, type)) return true;
    }
  } else if (node.is_array()) {
    for (const auto& value : node) {
      if (mentions_type(value, type)) return true;
    }
  }
  return false;
}

std::vector<json> flatten_sequence(const json& node, const char* list_key) {
  std::vector<json> out;
  if (node.is_null()) return out;
  if (node.is_object() && node.value("type", "") == "Sequence") {
    for (const auto& child : node.at(list_key)) {
      auto nested = flatten_sequence(child, list_key);
      out.insert(out.end(), nested.begin(), nested.end());
    }
    return out;
  }
  out.push_back(node);
  return out;
}

void import_normalizer(const json& node, ModelParts& parts) {
  for (const json& step : flatten_sequence(node, "normalizers")) {
    const std::string type = step.value("type", "");
    if (type == "NFKC") {
      parts.normalizer.nfkc = true;
    } else if (type == "Prepend" && step.value("prepend", "") == kWordBoundary) {
      parts.normalizer.add_prefix = true;
    } else if (type == "Replace" && step.contains("pattern") && step["pattern"].value("String", "") == " " &&
               step.value("content", "") == kWordBoundary) {
      parts.normalizer.replace_whitespace = true;
    } else {
      unsupported("unsupported normalizer \"" + type + "\"");
    }
  }
}

void import_pre_tokenizer(const json& node, ModelParts& parts) {
  const auto steps = flatten_sequence(node, "pretokenizers");
  std::optional<std::string> split_pattern;
  bool byte_level = false;
  bool byte_level_regex = false;
  for (const json& step : steps) {
    const std::string type = step.value("type", "");
    if (type == "ByteLevel") {
      byte_level = true;
      byte_level_regex = get_bool(step, "use_regex", true);
      parts.pre_tokenizer.add_prefix_space = get_bool(step, "add_prefix_space", false);
    } else if (type == "Split") {
      if (step.value("behavior", "") != "Isolated" || get_bool(step, "invert", false)) {
        unsupported("only isolated, non-inverted Split pre-tokenizers are supported");
      }
      if (!step.contains("pattern") || !step["pattern"].contains("Regex")) {
        unsupported("Split pre-tokenizer needs a Regex pattern");
      }
      if (split_pattern) unsupported("more than one Split pre-tokenizer");
      split_pattern = step["pattern"]["Regex"].get<std::string>();
    } else if (type == "WhitespaceSplit") {
      parts.pre_tokenizer.kind = PreTokenizerKind::Whitespace;
    } else if (type == "Metaspace") {
      if (step.value("replacement", std::string(kWordBoundary)) != kWordBoundary) {
        unsupported("Metaspace replacement must be U+2581");
      }
      parts.normalizer.replace_whitespace = true;
      std::string scheme = "always";
      if (step.contains("prepend_scheme") && step["prepend_scheme"].is_string()) {
        scheme = step["prepend_scheme"].get<std::string>();
      } else if (step.contains("add_prefix_space")) {
        scheme = get_bool(step, "add_prefix_space", true) ? "always" : "never";
      }
      parts.normalizer.add_prefix = scheme != "never";
      if (get_bool(step, "split", true)) parts.pre_tokenizer.kind = PreTokenizerKind::Metaspace;
    } else {
      unsupported("unsupported pre_tokenizer \"" + type + "\"");
    }
  }
  if (byte_level) {
    if (split_pattern && byte_level_regex) unsupported("Split combined with a regex ByteLevel step");
    parts.pre_tokenizer.byte_mapping = true;
    if (split_pattern) {
      parts.pre_tokenizer.kind = PreTokenizerKind::Regex;
      parts.pre_tokenizer.pattern = *split_pattern;
    } else if (byte_level_regex) {
      parts.pre_tokenizer.kind = PreTokenizerKind::Regex;
      parts.pre_tokenizer.pattern = std::string(kGpt2Pattern);
    }
  } else if (split_pattern) {
    parts.pre_tokenizer.kind = PreTokenizerKind::Regex;
    parts.pre_tokenizer.pattern = *split_pattern;
  }
}

TokenizerModel parse_imported(const json& doc) {
  const json& model = doc.at("model");
  if (!model.is_object() || model.value("type", "") != "BPE") {
    unsupported("unsupported model type \"" + (model.is_object() ? model.value("type", "") : std::string()) + "\"");
  }
  for (const char* key : {"continuing_subword_prefix", "end_of_word_suffix"}) {
    if (model.contains(key) && model[key].is_string() && !model[key].get<std::string>().empty()) {
      unsupported(std::string(key) + " is not supported");
    }
  }
  if (model.contains("dropout") && model["dropout"].is_number() && model["dropout"].get<double>() != 0.0) {
    unsupported("BPE dropout is not supported");
  }

  const json pre = doc.value("pre_tokenizer", json());
  const json norm = doc.value("normalizer", json());
  const Mode mode = mentions_type(pre, "ByteLevel") || mentions_type(doc.value("decoder", json()), "ByteLevel")
                        ? Mode::ByteLevel
                        : Mode::SentencePiece;

  ModelParts parts;
  parts.mode = mode;
  parts.max_token_length = default_max_token_length(mode);
  import_normalizer(norm, parts);
  import_pre_tokenizer(pre, parts);
  if (mode == Mode::ByteLevel) parts.pre_tokenizer.byte_mapping = true;

  // Added tokens outside the model vocabulary keep their raw content.
  std::map<TokenId, std::string> extra;
  std::vector<std::pair<TokenId, bool>> added;
  if (doc.contains("added_tokens") && doc["added_tokens"].is_array()) {
    std::set<TokenId> in_vocab;
    for (const auto& [key, value] : model.at("vocab").items()) in_vocab.insert(value.get<TokenId>());
    for (const auto& entry : doc["added_tokens"]) {
      const auto id = entry.at("id").get<TokenId>();
      if (!in_vocab.count(id)) extra.emplace(id, entry.at("content").get<std::string>());
      added.emplace_back(id, get_bool(entry, "special", false));
    }
  }
  parts.tokens = collect_vocab(model.at("vocab"), mode, std::move(extra));
  parts.merges = resolve_merges(model.value("merges", json::array()), mode, parts.tokens);
  parts.ignore_merges = get_bool(model, "ignore_merges", false);
  parts.byte_fallback = get_bool(model, "byte_fallback", false);
  for (const auto& [id, special] : added) {
    if (special) parts.special_tokens.push_back(id);
  }
  if (model.contains("unk_token") && model["unk_token"].is_string()) {
    const std::string raw = model["unk_token"].get<std::string>();
    auto it = std::find(parts.tokens.begin(), parts.tokens.end(), raw);
    if (it == parts.tokens.end() && mode == Mode::ByteLevel) {
      it = std::find(parts.tokens.begin(), parts.tokens.end(), decode_token(mode, raw));
    }
    if (it == parts.tokens.end()) throw Error(ErrorCode::InconsistentModel, "unk_token is not in the vocabulary");
    parts.unk_token = static_cast<TokenId>(it - parts.tokens.begin());
  }
  std::sort(parts.special_tokens.begin(), parts.special_tokens.end());
  parts.special_tokens.erase(std::unique(parts.special_tokens.begin(), parts.special_tokens.end()),
                             parts.special_tokens.end());
  return TokenizerModel(std::move(parts));
}

}  // namespace

TokenizerModel parse_tokenizer_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    format_error(std::string("tokenizer file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("model")) format_error("tokenizer file has no \"model\" object");
  try {
    if (doc.contains("mode")) return parse_canonical(doc);
    return parse_imported(doc);
  } catch (const json::exception& e) {
    format_error(std::string("malformed tokenizer file: ") + e.what());
  }
}

TokenizerModel load_tokenizer(const std::string& path) { return parse_tokenizer_json(read_file(path)); }

std::string display_token(const TokenizerModel& model, TokenId id) {
  return encode_token(model.mode(), model.token(id));
}

std::string to_canonical_json(const TokenizerModel& model) {
  const ModelParts& p = model.parts();
  json vocab = json::object();
  for (TokenId id = 0; id < p.tokens.size(); ++id) vocab[encode_token(p.mode, p.tokens[id])] = id;

  json merges = json::array();
  for (const MergeRule& m : p.merges) {
    std::string l = encode_token(p.mode, p.tokens[m.left]);
    std::string r = encode_token(p.mode, p.tokens[m.right]);
    if (l.find(' ') != std::string::npos || r.find(' ') != std::string::npos) {
      merges.push_back(json::array({l, r}));
    } else {
      merges.push_back(l + " " + r);
    }
  }

  json model_obj = {
      {"type", "BPE"},
      {"vocab", std::move(vocab)},
      {"merges", std::move(merges)},
      {"ignore_merges", p.ignore_merges},
      {"byte_fallback", p.byte_fallback},
      {"unk_token", p.unk_token ? json(encode_token(p.mode, p.tokens[*p.unk_token])) : json(nullptr)},
      {"max_token_length", p.max_token_length ? json(*p.max_token_length) : json(nullptr)},
  };

  const char* pre_type = "None";
  switch (p.pre_tokenizer.kind) {
    case PreTokenizerKind::Regex: pre_type = "Regex"; break;
    case PreTokenizerKind::Whitespace: pre_type = "Whitespace"; break;
    case PreTokenizerKind::Metaspace: pre_type = "Metaspace"; break;
    case PreTokenizerKind::None: break;
  }
  json pre = {
      {"type", pre_type},
      {"byte_mapping", p.pre_tokenizer.byte_mapping},
      {"add_prefix_space", p.pre_tokenizer.add_prefix_space},
  };
  if (p.pre_tokenizer.kind == PreTokenizerKind::Regex) pre["pattern"] = p.pre_tokenizer.pattern;

  std::vector<TokenId> specials = p.special_tokens;
  std::sort(specials.begin(), specials.end());

  json doc = {
      {"version", kFormatVersion},
      {"mode", mode_name(p.mode)},
      {"model", std::move(model_obj)},
      {"normalizer",
       {{"nfkc", p.normalizer.nfkc},
        {"replace_whitespace", p.normalizer.replace_whitespace},
        {"add_prefix", p.normalizer.add_prefix}}},
      {"pre_tokenizer", std::move(pre)},
      {"special_tokens", specials},
  };
  return doc.dump(2, ' ', false, json::error_handler_t::strict) + "\n";
}

void save_tokenizer(const TokenizerModel& model, const std::string& path) {
  write_file_atomic(path, to_canonical_json(model));
}

// --- embeddings ------------------------------------------------------------

namespace {

constexpr char kEmbeddingMagic[8] = {'T', 'O', 'K', 'E', 'M', 'B', '0', '1'};

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

EmbeddingMatrix parse_embeddings(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kEmbeddingMagic, 8) != 0) {
    format_error("embedding file lacks the TOKEMB01 header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t rows = read_u32(p + 8);
  const std::uint32_t cols = read_u32(p + 12);
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (bytes.size() != 16 + count * 4) format_error("embedding file size does not match its header");
  EmbeddingMatrix m(rows, cols);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = read_u32(p + 16 + i * 4);
    float value;
    std::memcpy(&value, &bits, sizeof(value));
    if (!std::isfinite(value)) format_error("embedding file contains a non-finite value");
    m.data[i] = value;
  }
  return m;
}

EmbeddingMatrix read_embeddings(const std::string& path) { return parse_embeddings(read_file(path)); }

std::string serialize_embeddings(const EmbeddingMatrix& matrix) {
  std::string out(kEmbeddingMagic, 8);
  append_u32(out, static_cast<std::uint32_t>(matrix.rows));
  append_u32(out, static_cast<std::uint32_t>(matrix.cols));
  out.reserve(out.size() + matrix.data.size() * 4);
  for (float value : matrix.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    append_u32(out, bits);
  }
  return out;
}

void write_embeddings(const EmbeddingMatrix& matrix, const std::string& path) {
  write_file_atomic(path, serialize_embeddings(matrix));
}

}  // namespace tokforge
