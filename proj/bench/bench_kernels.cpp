// Serial reference vs OpenMP kernels: similarity matrix construction and greedy max cover.
//
//   bench_kernels [candidates] [universe] [dim] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "taudis/maxcover.hpp"
#include "taudis/simgraph.hpp"

using h_clock = std::chrono::high_resolution_clock;

template <typename Fn>
double best_ms(int repeats, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t1 = h_clock::now();
    fn();
    auto t2 = h_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t2 - t1).count());
  }
  return best;
}

int main(int argc, char** argv) {
  const std::size_t n_candidates = argc > 1 ? std::stoul(argv[1]) : 600;
  const std::size_t n_universe = argc > 2 ? std::stoul(argv[2]) : 20000;
  const std::size_t dim = argc > 3 ? std::stoul(argv[3]) : 64;
  const int repeats = argc > 4 ? std::atoi(argv[4]) : 3;

  // Clustered embeddings so the thresholded matrix is neither empty nor dense.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t clusters = 50;
  std::vector<std::vector<double>> centers(clusters, std::vector<double>(dim));
  for (auto& c : centers) {
    for (double& x : c) x = normal(rng);
  }
  std::vector<std::vector<double>> data(n_universe, std::vector<double>(dim));
  std::vector<std::string> ids(n_universe);
  for (std::size_t i = 0; i < n_universe; ++i) {
    const auto& c = centers[i % clusters];
    for (std::size_t d = 0; d < dim; ++d) data[i][d] = c[d] + 0.35 * normal(rng);
    ids[i] = fmt::format("t{:06}", i);
  }
  std::vector<taudis::EmbeddingRef> universe;
  for (std::size_t i = 0; i < n_universe; ++i) universe.push_back({ids[i], data[i]});
  std::vector<taudis::EmbeddingRef> candidates(universe.begin(),
                                               universe.begin() + static_cast<std::ptrdiff_t>(n_candidates));

  std::cout << "threads " << omp_get_max_threads() << "\n";
  std::cout << fmt::format("similarity {}x{} d={}\n", n_candidates, n_universe, dim);

  taudis::SimilarityMatrix serial, parallel;
  const double t_serial = best_ms(repeats, [&] {
    serial = taudis::build_similarity_matrix_serial(candidates, universe, 0.8);
  });
  const double t_parallel = best_ms(repeats, [&] {
    parallel = taudis::build_similarity_matrix(candidates, universe, 0.8);
  });
  std::cout << fmt::format("  serial   {:10.2f} ms  nnz {}\n", t_serial, serial.nonzeros());
  std::cout << fmt::format("  openmp   {:10.2f} ms  nnz {}  speedup {:.2f}x  identical {}\n", t_parallel,
                           parallel.nonzeros(), t_serial / t_parallel,
                           serial.values == parallel.values && serial.col_index == parallel.col_index);

  const taudis::CoverProblem problem = taudis::to_cover_problem(parallel);
  const std::size_t k = n_candidates / 4;
  taudis::CoverSolution g_serial, g_parallel, g_lazy;
  const double c_serial = best_ms(repeats, [&] { g_serial = taudis::greedy_max_cover_serial(problem, k); });
  const double c_parallel = best_ms(repeats, [&] { g_parallel = taudis::greedy_max_cover(problem, k); });
  const double c_lazy = best_ms(repeats, [&] { g_lazy = taudis::lazy_greedy_max_cover(problem, k); });
  std::cout << fmt::format("greedy cover k={} over {} candidates, universe {}\n", k,
                           problem.candidate_count(), problem.universe_size());
  std::cout << fmt::format("  serial   {:10.2f} ms  coverage {}\n", c_serial, g_serial.coverage());
  std::cout << fmt::format("  openmp   {:10.2f} ms  coverage {}  identical {}\n", c_parallel,
                           g_parallel.coverage(), g_parallel == g_serial);
  std::cout << fmt::format("  lazy     {:10.2f} ms  coverage {}  identical {}\n", c_lazy, g_lazy.coverage(),
                           g_lazy == g_serial);
  return 0;
}
