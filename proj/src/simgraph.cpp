#include "taudis/simgraph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "taudis/maxcover.hpp"

namespace taudis {

namespace {

// Both kernels share this exact accumulation order so their results agree bit for bit.
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cosine_from(double d, double norm_a, double norm_b) {
  return std::clamp(d / (norm_a * norm_b), -1.0, 1.0);
}

constexpr std::size_t kRowBlock = 16;
constexpr std::size_t kColBlock = 512;

struct Prepared {
  std::vector<std::uint32_t> candidate_col;  // column index of each candidate in the universe
  std::vector<double> row_norm;
  std::vector<double> col_norm;
};

Prepared prepare(std::span<const EmbeddingRef> candidates, std::span<const EmbeddingRef> universe,
                 double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must lie in (0, 1)");
  Prepared p;
  std::unordered_map<std::string_view, std::uint32_t> col_of;
  col_of.reserve(universe.size());
  const std::size_t dim = universe.empty() ? 0 : universe.front().embedding.size();
  p.col_norm.reserve(universe.size());
  for (std::size_t c = 0; c < universe.size(); ++c) {
    const auto& ref = universe[c];
    if (ref.embedding.size() != dim) {
      throw std::invalid_argument("embedding dimension mismatch for instance '" + ref.id + "'");
    }
    const double n = std::sqrt(dot(ref.embedding, ref.embedding));
    if (n == 0.0) throw std::invalid_argument("zero-norm embedding for instance '" + ref.id + "'");
    p.col_norm.push_back(n);
    if (!col_of.emplace(ref.id, static_cast<std::uint32_t>(c)).second) {
      throw std::invalid_argument("duplicate universe id '" + ref.id + "'");
    }
  }
  p.candidate_col.reserve(candidates.size());
  p.row_norm.reserve(candidates.size());
  for (const auto& ref : candidates) {
    auto it = col_of.find(ref.id);
    if (it == col_of.end()) {
      throw std::invalid_argument("candidate '" + ref.id + "' is not in the universe");
    }
    p.candidate_col.push_back(it->second);
    p.row_norm.push_back(p.col_norm[it->second]);
  }
  return p;
}

SimilarityMatrix assemble(std::span<const EmbeddingRef> candidates,
                          std::span<const EmbeddingRef> universe, double sigma,
                          std::vector<std::vector<std::pair<std::uint32_t, double>>>& rows) {
  SimilarityMatrix m;
  m.sigma = sigma;
  m.row_ids.reserve(candidates.size());
  for (const auto& ref : candidates) m.row_ids.push_back(ref.id);
  m.col_ids.reserve(universe.size());
  for (const auto& ref : universe) m.col_ids.push_back(ref.id);
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.size();
  m.col_index.reserve(nnz);
  m.values.reserve(nnz);
  m.row_offsets.reserve(rows.size() + 1);
  for (auto& r : rows) {
    for (const auto& [c, v] : r) {
      m.col_index.push_back(c);
      m.values.push_back(v);
    }
    m.row_offsets.push_back(m.col_index.size());
  }
  return m;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("embedding dimension mismatch");
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("zero-norm embedding");
  return cosine_from(dot(a, b), na, nb);
}

double SimilarityMatrix::at(std::size_t r, std::size_t c) const {
  auto cols = row_cols(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(c));
  if (it == cols.end() || *it != c) return 0.0;
  return values[row_offsets[r] + static_cast<std::size_t>(it - cols.begin())];
}

SimilarityMatrix build_similarity_matrix(std::span<const EmbeddingRef> candidates,
                                         std::span<const EmbeddingRef> universe, double sigma) {
  const Prepared p = prepare(candidates, universe, sigma);
  const std::size_t n_rows = candidates.size();
  const std::size_t n_cols = universe.size();
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n_rows);

  const auto row_blocks = static_cast<std::ptrdiff_t>((n_rows + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t rb = 0; rb < row_blocks; ++rb) {
    const std::size_t r0 = static_cast<std::size_t>(rb) * kRowBlock;
    const std::size_t r1 = std::min(r0 + kRowBlock, n_rows);
    for (std::size_t c0 = 0; c0 < n_cols; c0 += kColBlock) {
      const std::size_t c1 = std::min(c0 + kColBlock, n_cols);
      for (std::size_t r = r0; r < r1; ++r) {
        const auto& a = candidates[r].embedding;
        auto& out = rows[r];
        for (std::size_t c = c0; c < c1; ++c) {
          const double s = c == p.candidate_col[r]
                               ? 1.0
                               : cosine_from(dot(a, universe[c].embedding), p.row_norm[r], p.col_norm[c]);
          if (s > sigma) out.emplace_back(static_cast<std::uint32_t>(c), s);
        }
      }
    }
  }
  return assemble(candidates, universe, sigma, rows);
}

SimilarityMatrix build_similarity_matrix_serial(std::span<const EmbeddingRef> candidates,
                                                std::span<const EmbeddingRef> universe,
                                                double sigma) {
  const Prepared p = prepare(candidates, universe, sigma);
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(candidates.size());
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    for (std::size_t c = 0; c < universe.size(); ++c) {
      const double s = c == p.candidate_col[r]
                           ? 1.0
                           : cosine_similarity(candidates[r].embedding, universe[c].embedding);
      if (s > sigma) rows[r].emplace_back(static_cast<std::uint32_t>(c), s);
    }
  }
  return assemble(candidates, universe, sigma, rows);
}

CoverProblem to_cover_problem(const SimilarityMatrix& matrix) {
  CoverProblem problem;
  // Columns appearing in any row form the universe, indexed in column order.
  std::vector<std::int64_t> element_of(matrix.cols(), -1);
  constexpr std::int64_t kPresent = -2;
  for (std::uint32_t c : matrix.col_index) element_of[c] = kPresent;
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    if (element_of[c] == kPresent) {
      element_of[c] = static_cast<std::int64_t>(problem.element_ids.size());
      problem.element_ids.push_back(matrix.col_ids[c]);
    }
  }
  problem.candidate_ids = matrix.row_ids;
  problem.subsets.reserve(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    std::vector<std::uint32_t> subset;
    auto cols = matrix.row_cols(r);
    subset.reserve(cols.size());
    for (std::uint32_t c : cols) subset.push_back(static_cast<std::uint32_t>(element_of[c]));
    problem.subsets.push_back(std::move(subset));
  }
  return problem;
}

}  // namespace taudis
