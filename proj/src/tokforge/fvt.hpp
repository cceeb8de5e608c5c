#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tokforge/model.hpp"

namespace tokforge {

// Row-per-token dense matrix, row-major.
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool operator==(const EmbeddingMatrix&) const = default;
};

// Fast Vocabulary Transfer. Tokens present in the old vocabulary (matched by
// content) copy their row; every other token gets the mean of the rows of its
// old-tokenizer decomposition, computed on the raw token content with merge
// skipping off.
EmbeddingMatrix fvt_transfer(const TokenizerModel& old_model, const TokenizerModel& new_model,
                             const EmbeddingMatrix& old_embeddings);

}  // namespace tokforge
