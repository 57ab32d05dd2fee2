#pragma once

// Monte Carlo checks of the closed-form probability bounds and phase scans.
//
// Trial i of a plan draws from derive_stream(seed, hash_label(plan label), i),
// so every estimate is a pure function of (plan, seed) regardless of the
// number of workers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slth/pruning.hpp"
#include "slth/random.hpp"
#include "slth/subset_sum.hpp"

namespace slth {

enum class BoundDirection {
  LowerBound,  // pass iff estimate >= bound - 3 se
  UpperBound,  // pass iff estimate <= bound + 3 se
  Equality,    // pass iff |estimate - bound| <= 3 se
};

std::string direction_name(BoundDirection direction);

/// For frequency estimates std_error is the one-sided Wilson (z = 3) band
/// width over 3 on the side facing the bound; for sample means it is the
/// usual standard error of the mean.
struct BoundCheckResult {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  BoundDirection direction = BoundDirection::UpperBound;
  std::size_t trials = 0;
  bool pass = false;
};

/// Fills `pass` from the 3-sigma rule for the given direction.
BoundCheckResult make_bound_check(std::string name, double estimate, double std_error,
                                  double bound, BoundDirection direction,
                                  std::size_t trials);

/// sqrt(p (1 - p) / trials).
double binomial_std_error(std::size_t successes, std::size_t trials);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval with z standard deviations.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 3.0);

/// Counts trials for which `event` returns true; trial i gets its own stream.
std::size_t count_events(std::size_t trials, SeedSpec seed, const std::string& label,
                         const std::function<bool(RandomStream&)>& event);

// ---- closed-form bounds -----------------------------------------------------

/// (1/16) (2 eps / sqrt(pi (1 + 2 sqrt(c_d) + 2 c_d) k))^d
double nsn_hit_bound(std::size_t d, std::size_t k, double epsilon);
/// 3 (4 eps^2 / (pi (1 - 2 sqrt(c_d)) j))^d
double joint_hit_bound(std::size_t d, std::size_t j, double epsilon);
/// exp(-2 (k / d^2) (1 - d / k)^2)
double intersection_tail_bound(std::size_t k, std::size_t d);
/// C(k, k-j) C(n-k, j) / C(n, k): chance a uniform k-subset shares k-j
/// elements with a fixed one.
double overlap_probability(std::size_t n, std::size_t k, std::size_t j);

// ---- lemma checks -----------------------------------------------------------

struct ChiSquaredTails {
  BoundCheckResult upper;  // Pr(X >= d + 2 sqrt(dt) + 2t) <= exp(-t)
  BoundCheckResult lower;  // Pr(X <= d - 2 sqrt(dt)) <= exp(-t)
};

/// Throws ParameterError unless d >= 1 and t > 0.
ChiSquaredTails check_chi_squared_tails(std::size_t d, double t, std::size_t trials,
                                        SeedSpec seed);

/// X ~ N(0, sigma^2): Pr(|X - z| <= eps) <= Pr(|X| <= eps). The estimate is
/// the shifted frequency, the bound the centered one, and the standard error
/// that of their paired difference.
BoundCheckResult check_most_probable_interval(double sigma, double z, double epsilon,
                                              std::size_t trials, SeedSpec seed);

/// Sum of k NSN vectors lands in the eps-box around z. Requires k >= 16,
/// d <= k, ||z||_1 <= sqrt(k), 0 < eps < 1/4, z of length d.
BoundCheckResult check_nsn_hit_lower_bound(std::size_t d, std::size_t k, double epsilon,
                                           const std::vector<double>& z,
                                           std::size_t trials, SeedSpec seed);

/// A = sum of vectors [0, j), B = [j, k), C = [k, k + j) of one NSN draw;
/// joint event A + B and B + C both in the eps-box. Requires k >= 64,
/// 1 <= j <= k, eps > 0, z of length d.
BoundCheckResult check_joint_upper_bound(std::size_t d, std::size_t k, std::size_t j,
                                         double epsilon, const std::vector<double>& z,
                                         std::size_t trials, SeedSpec seed);

struct SecondMomentReport {
  BoundCheckResult first_moment;   // E[T] vs C(n,k) P(E_S0)
  BoundCheckResult second_moment;  // E[T^2] vs overlap decomposition
  double mean_t = 0.0;
  double mean_t2 = 0.0;
  double p_s0 = 0.0;
  std::vector<double> pair_probability;  // P(E_S0 and E_Sj), j = 0..
  std::vector<double> overlap_weight;    // overlap_probability(n, k, j)

  bool pass() const { return first_moment.pass && second_moment.pass; }
};

/// Enumerates every k-subset per trial. S0 = {0..k-1} and
/// S_j = {0..k-j-1} + {k..k+j-1} share k - j elements. Throws BudgetError
/// for n > 10 or k > 4, ParameterError for k = 0, k > n or bad z.
SecondMomentReport check_second_moment_identity(std::size_t n, std::size_t k, std::size_t d,
                                                double epsilon, const std::vector<double>& z,
                                                std::size_t trials, SeedSpec seed);

/// Two independent uniform k-subsets of [n]; tail Pr(|S & S'| >= k/d).
/// Requires n >= k^2, d >= 2, k > d.
BoundCheckResult check_intersection_tail(std::size_t n, std::size_t k, std::size_t d,
                                         std::size_t trials, SeedSpec seed);

struct LemmaCheckPlan {
  SeedSpec seed{};
  std::size_t tail_trials = 1'000'000;
  std::size_t hit_trials = 100'000;
  std::size_t moment_trials = 20'000;
};

/// The full battery used by `lemma-check` and the acceptance suite.
std::vector<BoundCheckResult> run_lemma_checks(const LemmaCheckPlan& plan);

// ---- phase scans ------------------------------------------------------------

struct PhaseRow {
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double rate = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  /// Per-trial outcome, filled by scan_rssp_phase for paired comparisons.
  std::vector<std::uint8_t> trial_success;
};

struct RsspScanPlan {
  double epsilon = 0.05;
  std::vector<std::size_t> n_list;
  std::size_t grid_size = 41;
  std::size_t trials = 200;
  SeedSpec seed{};
};

/// Per trial, draws max(n_list) uniforms on [-1, 1]; the scan at n uses the
/// first n, so rows are paired and per-trial success is monotone in n.
/// A trial succeeds when every point of the grid on [-1, 1] is hit exactly
/// (meet-in-the-middle).
std::vector<PhaseRow> scan_rssp_phase(const RsspScanPlan& plan);
std::string rssp_phase_csv(const RsspScanPlan& plan, const std::vector<PhaseRow>& rows);

struct MrssScanPlan {
  std::size_t d = 2;
  std::size_t k = 2;
  std::vector<std::size_t> n_list;
  double epsilon = 0.1;
  /// Targets are uniform on [-r/d, r/d]^d, so ||z||_1 <= r.
  double target_radius = 1.0;
  std::size_t trials = 200;
  SolverStrategy strategy = ExhaustiveEnum{};
  /// When set, each trial uses partition_boost with this group size.
  std::optional<std::size_t> group_size;
  SeedSpec seed{};
  std::size_t enumeration_budget = kDefaultEnumerationBudget;
};

std::vector<PhaseRow> scan_mrss_phase(const MrssScanPlan& plan);
std::string mrss_phase_csv(const MrssScanPlan& plan, const std::vector<PhaseRow>& rows);

struct PruneScanPlan {
  std::size_t d = 2;
  std::size_t c0 = 1;
  std::size_t c1 = 1;
  std::vector<std::size_t> n_list;
  std::size_t trials = 20;
  PruneParams params;
};

struct PruneScanRow {
  PhaseRow phase;  // success = every channel of the layer succeeded
  double channel_success_rate = 0.0;
  double median_probe_error = 0.0;
  double median_certified_ratio = 0.0;
};

/// Single-layer pruning success against n. Trial i uses the same seeds for
/// every n.
std::vector<PruneScanRow> scan_prune_success(const PruneScanPlan& plan);
std::string prune_scan_csv(const PruneScanPlan& plan, const std::vector<PruneScanRow>& rows);

std::string bound_checks_csv(const std::vector<BoundCheckResult>& results);

/// "%.17g"
std::string format_double(double value);

}  // namespace slth
