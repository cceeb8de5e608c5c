#pragma once

#include <string>
#include <string_view>

#include "tokforge/fvt.hpp"
#include "tokforge/model.hpp"

namespace tokforge {

// Tokenizer files. The canonical document has sorted keys, UTF-8 strings and
// no float fields, so save -> load -> save is byte-identical. Byte-level
// token strings use the printable-unit byte mapping.
//
// Loading also accepts the widespread tokenizer-JSON layout (BPE model,
// ByteLevel / Split / Metaspace pre-tokenizers, NFKC / Prepend / Replace
// normalizers, added_tokens) so pre-trained tokenizer files load directly.
TokenizerModel parse_tokenizer_json(std::string_view json_text);
TokenizerModel load_tokenizer(const std::string& path);
std::string to_canonical_json(const TokenizerModel& model);
void save_tokenizer(const TokenizerModel& model, const std::string& path);

// Token string as it appears in tokenizer files (byte-mapped in byte-level mode).
std::string display_token(const TokenizerModel& model, TokenId id);

// Embedding files: "TOKEMB01", u32 rows, u32 cols, rows*cols f32, all little-endian.
EmbeddingMatrix parse_embeddings(std::string_view bytes);
EmbeddingMatrix read_embeddings(const std::string& path);
std::string serialize_embeddings(const EmbeddingMatrix& matrix);
void write_embeddings(const EmbeddingMatrix& matrix, const std::string& path);

}  // namespace tokforge
