#include "taudis/maxcover.hpp"

#include "taudis/core_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace taudis {

CoverProblem make_cover_problem(const std::vector<NamedSubset>& subsets) {
  CoverProblem problem;
  std::unordered_map<std::string, std::uint32_t> index;
  std::unordered_set<std::string> seen;
  for (const auto& [cand, elements] : subsets) {
    if (!seen.insert(cand).second) throw std::invalid_argument("duplicate candidate id '" + cand + "'");
    std::vector<std::uint32_t> subset;
    subset.reserve(elements.size());
    for (const auto& e : elements) {
      auto [it, inserted] = index.try_emplace(e, static_cast<std::uint32_t>(problem.element_ids.size()));
      if (inserted) problem.element_ids.push_back(e);
      subset.push_back(it->second);
    }
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    problem.candidate_ids.push_back(cand);
    problem.subsets.push_back(std::move(subset));
  }
  return problem;
}

std::size_t marginal_gain(const CoverProblem& problem, std::size_t candidate,
                          const std::vector<char>& covered) {
  std::size_t gain = 0;
  for (std::uint32_t e : problem.subsets[candidate]) gain += covered[e] ? 0 : 1;
  return gain;
}

std::size_t coverage_of(const CoverProblem& problem, std::span<const std::size_t> picks) {
  std::vector<char> covered(problem.universe_size(), 0);
  std::size_t n = 0;
  for (std::size_t c : picks) {
    for (std::uint32_t e : problem.subsets[c]) {
      if (!covered[e]) {
        covered[e] = 1;
        ++n;
      }
    }
  }
  return n;
}

namespace {

struct Best {
  std::size_t gain = 0;
  std::size_t index = static_cast<std::size_t>(-1);
};

// Larger gain wins; equal gains go to the earlier rank.
inline Best better(const Best& a, const Best& b) {
  if (a.gain != b.gain) return a.gain > b.gain ? a : b;
  return a.index <= b.index ? a : b;
}

#pragma omp declare reduction(best_gain : Best : omp_out = better(omp_out, omp_in)) \
    initializer(omp_priv = Best{})

void mark(const CoverProblem& problem, std::size_t c, std::vector<char>& covered) {
  for (std::uint32_t e : problem.subsets[c]) covered[e] = 1;
}

CoverSolution finish(const CoverProblem& problem, std::vector<std::size_t> selected) {
  CoverSolution s;
  std::vector<char> covered(problem.universe_size(), 0);
  for (std::size_t c : selected) mark(problem, c, covered);
  for (std::size_t e = 0; e < covered.size(); ++e) {
    if (covered[e]) s.covered.push_back(static_cast<std::uint32_t>(e));
  }
  s.selected = std::move(selected);
  return s;
}

// Adds unselected members of `pool` (ascending rank) until `target` picks exist.
void pad_in_rank_order(std::span<const std::size_t> pool, std::vector<char>& chosen,
                       std::vector<std::size_t>& selected, std::size_t target) {
  for (std::size_t c : pool) {
    if (selected.size() >= target) break;
    if (!chosen[c]) {
      chosen[c] = 1;
      selected.push_back(c);
    }
  }
}

// Greedy restricted to `pool`, which must be sorted by rank.
std::vector<std::size_t> greedy_over(const CoverProblem& problem, std::span<const std::size_t> pool,
                                     std::size_t k, bool parallel) {
  const std::size_t target = std::min(k, pool.size());
  std::vector<char> covered(problem.universe_size(), 0);
  std::vector<char> chosen(problem.candidate_count(), 0);
  std::vector<std::size_t> selected;
  selected.reserve(target);
  const auto n = static_cast<std::ptrdiff_t>(pool.size());
  while (selected.size() < target) {
    Best best;
    if (parallel) {
#pragma omp parallel for reduction(best_gain : best) schedule(static)
      for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::size_t c = pool[static_cast<std::size_t>(i)];
        if (!chosen[c]) best = better(best, Best{marginal_gain(problem, c, covered), c});
      }
    } else {
      for (std::size_t c : pool) {
        if (!chosen[c]) best = better(best, Best{marginal_gain(problem, c, covered), c});
      }
    }
    if (best.gain == 0) break;
    chosen[best.index] = 1;
    selected.push_back(best.index);
    mark(problem, best.index, covered);
  }
  pad_in_rank_order(pool, chosen, selected, target);
  return selected;
}

std::vector<std::size_t> all_candidates(const CoverProblem& problem) {
  std::vector<std::size_t> pool(problem.candidate_count());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  return pool;
}

void require_k(std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
}

}  // namespace

CoverSolution greedy_max_cover(const CoverProblem& problem, std::size_t k) {
  require_k(k);
  const auto pool = all_candidates(problem);
  return finish(problem, greedy_over(problem, pool, k, /*parallel=*/true));
}

CoverSolution greedy_max_cover_serial(const CoverProblem& problem, std::size_t k) {
  require_k(k);
  const auto pool = all_candidates(problem);
  return finish(problem, greedy_over(problem, pool, k, /*parallel=*/false));
}

CoverSolution lazy_greedy_max_cover(const CoverProblem& problem, std::size_t k) {
  require_k(k);
  struct Entry {
    std::size_t bound;
    std::size_t index;
    std::size_t stamp;
  };
  // Top of the queue: largest bound, then smallest index.
  auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> queue(lower_priority);
  for (std::size_t c = 0; c < problem.candidate_count(); ++c) {
    queue.push({problem.subsets[c].size(), c, 0});
  }

  const std::size_t target = std::min(k, problem.candidate_count());
  std::vector<char> covered(problem.universe_size(), 0);
  std::vector<char> chosen(problem.candidate_count(), 0);
  std::vector<std::size_t> selected;
  while (selected.size() < target && !queue.empty()) {
    Entry top = queue.top();
    queue.pop();
    if (top.stamp != selected.size()) {
      top.bound = marginal_gain(problem, top.index, covered);
      top.stamp = selected.size();
      queue.push(top);
      continue;
    }
    if (top.bound == 0) break;
    chosen[top.index] = 1;
    selected.push_back(top.index);
    mark(problem, top.index, covered);
  }
  const auto pool = all_candidates(problem);
  pad_in_rank_order(pool, chosen, selected, target);
  return finish(problem, std::move(selected));
}

CoverSolution partitioned_max_cover(const CoverProblem& problem, std::size_t k,
                                    std::size_t partitions, std::uint64_t seed) {
  require_k(k);
  if (partitions < 2) throw std::invalid_argument("partitions must be at least 2");
  std::vector<std::size_t> order = all_candidates(problem);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> groups(partitions);
  for (std::size_t pos = 0; pos < order.size(); ++pos) groups[pos % partitions].push_back(order[pos]);
  for (auto& g : groups) std::sort(g.begin(), g.end());

  std::vector<std::vector<std::size_t>> picks(partitions);
  const auto m = static_cast<std::ptrdiff_t>(partitions);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t g = 0; g < m; ++g) {
    const auto& group = groups[static_cast<std::size_t>(g)];
    picks[static_cast<std::size_t>(g)] = greedy_over(problem, group, k, /*parallel=*/false);
  }

  std::vector<std::size_t> merged;
  for (const auto& p : picks) merged.insert(merged.end(), p.begin(), p.end());
  std::sort(merged.begin(), merged.end());
  return finish(problem, greedy_over(problem, merged, k, /*parallel=*/true));
}

CoverSolution brute_force_max_cover(const CoverProblem& problem, std::size_t k) {
  require_k(k);
  const std::size_t n = problem.candidate_count();
  const std::size_t r = std::min(k, n);
  double combos = 1.0;
  for (std::size_t i = 0; i < r; ++i) combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (std::round(combos) > kBruteForceLimit) {
    throw std::invalid_argument("brute force would enumerate more than 1e6 combinations");
  }
  if (r == 0) return {};

  const std::size_t words = (problem.universe_size() + 63) / 64;
  std::vector<std::vector<std::uint64_t>> bits(n, std::vector<std::uint64_t>(words, 0));
  for (std::size_t c = 0; c < n; ++c) {
    for (std::uint32_t e : problem.subsets[c]) bits[c][e / 64] |= std::uint64_t{1} << (e % 64);
  }

  std::vector<std::size_t> combo(r);
  std::iota(combo.begin(), combo.end(), std::size_t{0});
  std::vector<std::size_t> best = combo;
  std::size_t best_cover = 0;
  bool first = true;
  std::vector<std::uint64_t> acc(words);
  while (true) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t c : combo) {
      for (std::size_t w = 0; w < words; ++w) acc[w] |= bits[c][w];
    }
    std::size_t cover = 0;
    for (std::uint64_t w : acc) cover += static_cast<std::size_t>(std::popcount(w));
    if (first || cover > best_cover) {
      best_cover = cover;
      best = combo;
      first = false;
    }
    // Next combination in lexicographic order.
    std::size_t i = r;
    while (i > 0 && combo[i - 1] == n - r + (i - 1)) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t j = i; j < r; ++j) combo[j] = combo[j - 1] + 1;
  }
  return finish(problem, std::move(best));
}

CoverSolution solve_max_cover(const CoverProblem& problem, std::size_t k, CoverAlgorithm algorithm,
                              std::size_t partitions, std::uint64_t seed) {
  switch (algorithm) {
    case CoverAlgorithm::kGreedy:
      return greedy_max_cover(problem, k);
    case CoverAlgorithm::kLazy:
      return lazy_greedy_max_cover(problem, k);
    case CoverAlgorithm::kPartitioned:
      return partitioned_max_cover(problem, k, partitions, seed);
    case CoverAlgorithm::kBruteForce:
      return brute_force_max_cover(problem, k);
  }
  throw std::logic_error("unhandled cover algorithm");
}

nlohmann::ordered_json cover_problem_to_json(const CoverProblem& problem) {
  nlohmann::ordered_json doc;
  auto& subsets = doc["subsets"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < problem.candidate_count(); ++c) {
    auto arr = nlohmann::ordered_json::array();
    for (std::uint32_t e : problem.subsets[c]) arr.push_back(problem.element_ids[e]);
    subsets[problem.candidate_ids[c]] = std::move(arr);
  }
  doc["universe_size"] = problem.universe_size();
  return doc;
}

CoverProblem cover_problem_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object() || !doc.contains("subsets") || !doc["subsets"].is_object()) {
    throw std::invalid_argument("cover problem must be an object with a \"subsets\" object");
  }
  std::vector<NamedSubset> subsets;
  for (const auto& [cand, elems] : doc["subsets"].items()) {
    if (!elems.is_array()) throw std::invalid_argument("subset '" + cand + "' is not an array");
    std::vector<std::string> ids;
    for (const auto& e : elems) {
      if (e.is_string()) {
        ids.push_back(e.get<std::string>());
      } else if (e.is_number_integer()) {
        ids.push_back(std::to_string(e.get<long long>()));
      } else {
        throw std::invalid_argument("element ids must be strings or integers");
      }
    }
    subsets.emplace_back(cand, std::move(ids));
  }
  CoverProblem problem = make_cover_problem(subsets);
  if (doc.contains("universe_size")) {
    const auto& u = doc["universe_size"];
    if (!u.is_number_integer() || u.get<long long>() < static_cast<long long>(problem.universe_size())) {
      throw std::invalid_argument("universe_size is smaller than the union of all subsets");
    }
  }
  return problem;
}

nlohmann::ordered_json cover_solution_to_json(const CoverProblem& problem,
                                              const CoverSolution& solution) {
  nlohmann::ordered_json doc;
  auto selected = nlohmann::ordered_json::array();
  for (std::size_t c : solution.selected) selected.push_back(problem.candidate_ids[c]);
  std::vector<std::string> ids;
  ids.reserve(solution.covered.size());
  for (std::uint32_t e : solution.covered) ids.push_back(problem.element_ids[e]);
  std::sort(ids.begin(), ids.end());
  auto covered = nlohmann::ordered_json(ids);
  doc["selected"] = std::move(selected);
  doc["covered"] = std::move(covered);
  doc["coverage"] = solution.coverage();
  return doc;
}

}  // namespace taudis
