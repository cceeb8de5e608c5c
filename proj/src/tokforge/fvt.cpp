#include "tokforge/fvt.hpp"

#include <algorithm>

#include "tokforge/error.hpp"
#include "tokforge/parallel.hpp"

namespace tokforge {

EmbeddingMatrix fvt_transfer(const TokenizerModel& old_model, const TokenizerModel& new_model,
                             const EmbeddingMatrix& old_embeddings) {
  if (old_embeddings.rows != old_model.vocab_size()) {
    throw Error(ErrorCode::DimMismatch, "embedding rows (" + std::to_string(old_embeddings.rows) +
                                            ") differ from the old vocabulary size (" +
                                            std::to_string(old_model.vocab_size()) + ")");
  }
  if (old_embeddings.data.size() != old_embeddings.rows * old_embeddings.cols) {
    throw Error(ErrorCode::DimMismatch, "embedding data size does not match its shape");
  }

  const std::size_t cols = old_embeddings.cols;
  EmbeddingMatrix out(new_model.vocab_size(), cols);
  parallel_map_reduce<char>(
      new_model.vocab_size(),
      [&](char&, std::size_t begin, std::size_t end) {
        std::vector<TokenId> parts;
        std::vector<double> sum(cols);
        for (auto id = static_cast<TokenId>(begin); id < end; ++id) {
          const std::string& content = new_model.token(id);
          auto dst = out.row(id);
          if (const auto old_id = old_model.find(content)) {
            const auto src = old_embeddings.row(*old_id);
            std::copy(src.begin(), src.end(), dst.begin());
            continue;
          }
          parts.clear();
          try {
            old_model.tokenize_segment_into(content, false, parts);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::UnknownAtom) throw;
            parts.clear();
          }
          const auto& unk = old_model.parts().unk_token;
          if (parts.empty() || (unk && std::find(parts.begin(), parts.end(), *unk) != parts.end())) {
            throw Error(ErrorCode::UntokenizableNewToken,
                        "new token " + std::to_string(id) + " cannot be tokenized by the old model");
          }
          std::fill(sum.begin(), sum.end(), 0.0);
          for (TokenId p : parts) {
            const auto src = old_embeddings.row(p);
            for (std::size_t c = 0; c < cols; ++c) sum[c] += src[c];
          }
          const double n = static_cast<double>(parts.size());
          for (std::size_t c = 0; c < cols; ++c) dst[c] = static_cast<float>(sum[c] / n);
        }
      },
      [](char&, char&&) {}, 256);
  return out;
}

}  // namespace tokforge
