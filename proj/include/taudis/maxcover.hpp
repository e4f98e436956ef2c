#pragma once

// Maximum k-set cover solvers. Candidates are kept in rank order and every
// solver breaks ties toward the earlier-ranked candidate.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace taudis {

struct CoverProblem {
  std::vector<std::string> candidate_ids;
  // Sorted, duplicate-free element indices into element_ids.
  std::vector<std::vector<std::uint32_t>> subsets;
  std::vector<std::string> element_ids;

  std::size_t candidate_count() const { return candidate_ids.size(); }
  std::size_t universe_size() const { return element_ids.size(); }
};

using NamedSubset = std::pair<std::string, std::vector<std::string>>;

/// Candidates in the given (rank) order; element ids are interned in first-seen order.
/// Throws std::invalid_argument on a duplicate candidate id.
CoverProblem make_cover_problem(const std::vector<NamedSubset>& subsets);

struct CoverSolution {
  // Candidate indices in pick order.
  std::vector<std::size_t> selected;
  // Sorted element indices covered by the selection.
  std::vector<std::uint32_t> covered;

  std::size_t coverage() const { return covered.size(); }
  friend bool operator==(const CoverSolution&, const CoverSolution&) = default;
};

/// Plain greedy with the marginal-gain scan over candidates parallelised with OpenMP.
/// Once every remaining gain is 0 the selection is padded in rank order up to
/// min(k, candidates). Throws std::invalid_argument for k < 1.
CoverSolution greedy_max_cover(const CoverProblem& problem, std::size_t k);

/// Single-threaded reference for greedy_max_cover.
CoverSolution greedy_max_cover_serial(const CoverProblem& problem, std::size_t k);

/// Stale-gain priority-queue greedy; selections are identical to greedy_max_cover.
CoverSolution lazy_greedy_max_cover(const CoverProblem& problem, std::size_t k);

/// Seeded partition into `partitions` groups, greedy per group, then greedy over
/// the union of group picks. Throws std::invalid_argument for partitions < 2.
CoverSolution partitioned_max_cover(const CoverProblem& problem, std::size_t k,
                                    std::size_t partitions, std::uint64_t seed);

inline constexpr double kBruteForceLimit = 1e6;

/// Exact optimum by enumeration; ties go to the lexicographically smallest rank tuple.
/// Throws std::invalid_argument when C(n, k) exceeds kBruteForceLimit.
CoverSolution brute_force_max_cover(const CoverProblem& problem, std::size_t k);

enum class CoverAlgorithm;

/// Dispatches to the named solver; `partitions` and `seed` only affect the partitioned one.
CoverSolution solve_max_cover(const CoverProblem& problem, std::size_t k, CoverAlgorithm algorithm,
                              std::size_t partitions, std::uint64_t seed);

/// Number of elements of `candidate` not yet in `covered` (indexed by element).
std::size_t marginal_gain(const CoverProblem& problem, std::size_t candidate,
                          const std::vector<char>& covered);

/// Union size of the given candidates' subsets.
std::size_t coverage_of(const CoverProblem& problem, std::span<const std::size_t> picks);

/// {"subsets": {cand_id: [elem_id, ...]}, "universe_size": n}; subsets keep rank order.
nlohmann::ordered_json cover_problem_to_json(const CoverProblem& problem);
/// Element ids may be strings or integers. Throws std::invalid_argument on a malformed document.
CoverProblem cover_problem_from_json(const nlohmann::ordered_json& doc);
/// {"selected": [cand_id...], "covered": [elem_id...], "coverage": n}
/// Covered element ids are listed in sorted order.
nlohmann::ordered_json cover_solution_to_json(const CoverProblem& problem,
                                              const CoverSolution& solution);

}  // namespace taudis
