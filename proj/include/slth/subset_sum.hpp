#pragma once

// Random subset-sum solvers and counters.
//
// All solvers work on a VectorSet: n vectors of dimension d, row-major. The
// success event for a subset S is the closed infinity-norm box
//   || sum_{i in S} x_i - z ||_inf <= epsilon.
// Sums are always re-evaluated in ascending index order before a solution is
// reported, so every returned witness is reproducible from the raw vectors.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slth/random.hpp"

namespace slth {

inline constexpr std::size_t kDefaultEnumerationBudget = 5'000'000;

/// Non-owning view of n row-major vectors of dimension d.
class VectorSet {
 public:
  VectorSet(std::span<const double> values, std::size_t count, std::size_t dim);
  static VectorSet of(const NsnEnsemble& ensemble);
  static VectorSet scalars(std::span<const double> xs);

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const {
    return values_.subspan(i * dim_, dim_);
  }
  /// Rows [first, first + n).
  VectorSet slice(std::size_t first, std::size_t n) const;

 private:
  std::span<const double> values_;
  std::size_t count_;
  std::size_t dim_;
};

struct SubsetSolution {
  std::vector<std::size_t> indices;  // sorted ascending, 0-based
  std::vector<double> achieved;
  double residual_inf = 0.0;
};

/// Sum of the selected rows in ascending index order, and its residual.
SubsetSolution evaluate_subset(const VectorSet& vs,
                               std::vector<std::size_t> indices,
                               std::span<const double> target);

/// True iff `a` precedes `b` as sorted index sequences (a prefix precedes its
/// extensions).
bool lex_less(std::span<const std::size_t> a, std::span<const std::size_t> b);

enum class CardinalityMode { Exact, AtMost };

struct ExhaustiveEnum {};
struct MeetInTheMiddle {};
struct GreedySwap {
  std::size_t restarts = 8;
  std::size_t max_iters = 200;
};
using SolverStrategy = std::variant<ExhaustiveEnum, MeetInTheMiddle, GreedySwap>;

std::string strategy_name(const SolverStrategy& strategy);
/// Parses "enum", "mitm", "greedy" (GreedySwap with default settings).
SolverStrategy parse_strategy(const std::string& name);

/// min(1/d^2, 1/16).
double c_d(std::size_t dim);

struct SolverParams {
  double epsilon = 0.1;
  std::size_t k = 1;
  CardinalityMode mode = CardinalityMode::Exact;
  SolverStrategy strategy = ExhaustiveEnum{};
  /// Seeds GreedySwap restarts.
  SeedSpec seed{};
  std::size_t enumeration_budget = kDefaultEnumerationBudget;
};

enum class SolveStatus {
  Found,
  /// Heuristic search ended without a witness; infeasibility is not proven.
  NotFound,
  /// An exact strategy showed that no qualifying subset exists.
  ProvenInfeasible,
};

std::string status_name(SolveStatus status);

struct SolveOutcome {
  SolveStatus status = SolveStatus::NotFound;
  /// Set iff status == Found; residual_inf <= epsilon.
  std::optional<SubsetSolution> solution;
  /// Lowest-residual subset the strategy saw, feasible or not. Exhaustive
  /// enumeration and GreedySwap always fill this; meet-in-the-middle only
  /// when it finds a hit.
  std::optional<SubsetSolution> best;

  bool found() const { return status == SolveStatus::Found; }
};

/// Number of subsets the exact strategies visit: C(n, k), or
/// sum_{j <= k} C(n, j) in AtMost mode. Saturates at UINT64_MAX.
std::uint64_t family_size(std::size_t n, std::size_t k, CardinalityMode mode);

std::uint64_t binomial(std::size_t n, std::size_t k);

/// One-dimensional random subset sum: any subset (including the empty one)
/// whose sum lies within epsilon of z.
///
/// MeetInTheMiddle first tries a few quick two-table scans with the other two
/// quarter sums pinned, then streams the sorted sums of each half through a
/// heap over quarter tables, so memory is O(2^{n/4}) and the answer is exact.
/// The first witness found is returned, not the minimum residual. ExhaustiveEnum visits all 2^n subsets and
/// returns the minimum residual.
///
/// Throws ParameterError for a negative epsilon, CapacityError for n > 63 with
/// MeetInTheMiddle, BudgetError when 2^n exceeds the budget under
/// ExhaustiveEnum. GreedySwap is not supported here.
SolveOutcome solve_rssp_1d(std::span<const double> xs, double z, double epsilon,
                           const SolverStrategy& strategy = MeetInTheMiddle{},
                           std::size_t enumeration_budget =
                               kDefaultEnumerationBudget);

/// Exact one-dimensional meet-in-the-middle solver whose sorted quarter tables
/// are built once and reused across targets. Throws CapacityError for n > 63.
class RsspMitmSolver {
 public:
  struct Entry {
    double sum;
    std::uint64_t mask;
  };

  explicit RsspMitmSolver(std::span<const double> xs);
  std::size_t size() const { return xs_.size(); }
  SolveOutcome solve(double z, double epsilon) const;

 private:
  std::vector<double> xs_;
  std::vector<Entry> quarters_[4];
};

/// Multidimensional subset sum with a cardinality constraint.
///
/// ExhaustiveEnum visits the whole family in lexicographic order and keeps the
/// minimum residual (ties go to the lexicographically smallest set).
/// MeetInTheMiddle stores the left half's sums bucketed on an epsilon grid and
/// rebuilds right-half sums from quarter tables; the half table must fit the
/// enumeration budget and n must be at most 63. GreedySwap is a local search whose misses are reported
/// as NotFound.
SolveOutcome solve_mrss(const VectorSet& vs, std::span<const double> target,
                        const SolverParams& params);

/// Exact count of k-subsets whose sum lands in the epsilon box around target.
std::uint64_t subset_sum_number(
    const VectorSet& vs, std::span<const double> target, std::size_t k,
    double epsilon, std::size_t enumeration_budget = kDefaultEnumerationBudget);

struct GroupAttempt {
  std::size_t group = 0;
  std::size_t first = 0;
  std::size_t size = 0;
  SolveStatus status = SolveStatus::NotFound;
};

struct BoostResult {
  std::optional<SubsetSolution> solution;  // indices refer to the full set
  std::vector<GroupAttempt> attempts;      // in the order tried
};

/// Splits the vectors into floor(n / group_size) disjoint consecutive groups
/// (the last one absorbs the remainder) and, per target, tries each group in
/// turn with solve_mrss until one succeeds.
///
/// Throws ParameterError unless group_size >= k^2 and n >= group_size.
std::vector<BoostResult> partition_boost(
    const VectorSet& vs, const std::vector<std::vector<double>>& targets,
    std::size_t group_size, const SolverParams& params);

struct CoverReport {
  std::vector<bool> hit;
  std::vector<SolveStatus> status;
  std::vector<double> residual;  // NaN where no witness exists
  double min_residual = 0.0;     // over hit targets; NaN if none
  double max_residual = 0.0;
  bool all_hit = false;
};

/// Checks every point of a one-dimensional target grid with solve_rssp_1d.
CoverReport cover_targets_1d(std::span<const double> xs,
                             std::span<const double> grid, double epsilon,
                             const SolverStrategy& strategy = MeetInTheMiddle{});

/// Checks every target of a multidimensional grid with solve_mrss.
CoverReport cover_targets(const VectorSet& vs,
                          const std::vector<std::vector<double>>& grid,
                          const SolverParams& params);

/// grid_size evenly spaced points covering [lo, hi] (both ends included).
std::vector<double> linear_grid(double lo, double hi, std::size_t grid_size);

}  // namespace slth
