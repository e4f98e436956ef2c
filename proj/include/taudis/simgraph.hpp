#pragma once

// Thresholded cosine-similarity structure between uncertain candidates and
// every detected instance.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace taudis {

struct CoverProblem;

/// A named embedding row. Ids must be unique within a universe.
struct EmbeddingRef {
  std::string id;
  std::span<const double> embedding;
};

/// dot(a, b) / (|a| |b|) clamped to [-1, 1]. Throws std::invalid_argument on a
/// dimension mismatch or a zero-norm input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Compressed-row sparse matrix. Rows are candidates in rank order, columns are
/// the universe in the order it was supplied. Every stored value exceeds the threshold.
struct SimilarityMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::uint32_t> col_index;
  std::vector<double> values;
  double sigma = 0.0;

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return col_ids.size(); }
  std::size_t nonzeros() const { return values.size(); }
  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {col_index.data() + row_offsets[r], row_offsets[r + 1] - row_offsets[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + row_offsets[r], row_offsets[r + 1] - row_offsets[r]};
  }
  /// Stored value or 0 when the pair was thresholded away.
  double at(std::size_t r, std::size_t c) const;
};

/// OpenMP kernel: blocked over candidate rows and universe columns.
/// Keeps exactly the pairs with similarity > sigma.
/// Throws std::invalid_argument when a candidate is absent from the universe,
/// an embedding has zero norm, dimensions disagree, or sigma is outside (0, 1).
SimilarityMatrix build_similarity_matrix(std::span<const EmbeddingRef> candidates,
                                         std::span<const EmbeddingRef> universe, double sigma);

/// Single-threaded reference of build_similarity_matrix; produces an identical matrix.
SimilarityMatrix build_similarity_matrix_serial(std::span<const EmbeddingRef> candidates,
                                                std::span<const EmbeddingRef> universe,
                                                double sigma);

/// One subset per row; the universe is the set of columns with at least one stored entry.
CoverProblem to_cover_problem(const SimilarityMatrix& matrix);

}  // namespace taudis
