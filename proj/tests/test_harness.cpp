#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "slth/error.hpp"
#include "slth/harness.hpp"

using namespace slth;

namespace {

double hit_formula(double d, double k, double eps) {
  const double c = std::min(1.0 / (d * d), 1.0 / 16.0);
  return std::pow(2 * eps / std::sqrt(std::numbers::pi * (1 + 2 * std::sqrt(c) + 2 * c) * k), d) / 16;
}

double joint_formula(double d, double j, double eps) {
  const double c = std::min(1.0 / (d * d), 1.0 / 16.0);
  return 3 * std::pow(4 * eps * eps / (std::numbers::pi * (1 - 2 * std::sqrt(c)) * j), d);
}

}  // namespace

TEST_CASE("closed-form bounds") {
  CHECK(nsn_hit_bound(1, 64, 0.2) == doctest::Approx(0.0013830835076325944).epsilon(1e-12));
  CHECK(nsn_hit_bound(2, 64, 0.2) == doctest::Approx(3.0606719825364494e-05).epsilon(1e-12));
  CHECK(nsn_hit_bound(3, 64, 0.2) == doctest::Approx(6.77306390611091e-07).epsilon(1e-12));
  for (std::size_t d = 1; d <= 4; ++d) {
    CHECK(nsn_hit_bound(d, 64, 0.2) == doctest::Approx(hit_formula(d, 64, 0.2)).epsilon(1e-12));
    CHECK(nsn_hit_bound(d, 64, 0.2) ==
          doctest::Approx(nsn_hit_bound(d, 64, 0.1) * std::pow(2.0, d)).epsilon(1e-12));
  }
  const double table[3][2] = {{0.009549296585513723, 3.039635509270135e-05},
                              {0.0023873241463784308, 1.8997721932938343e-06},
                              {0.0011936620731892154, 4.7494304832345857e-07}};
  const std::size_t js[3] = {8, 32, 64};
  for (int r = 0; r < 3; ++r)
    for (std::size_t d = 1; d <= 2; ++d) {
      CHECK(joint_hit_bound(d, js[r], 0.1) == doctest::Approx(table[r][d - 1]).epsilon(1e-12));
      CHECK(joint_hit_bound(d, js[r], 0.1) ==
            doctest::Approx(joint_formula(d, js[r], 0.1)).epsilon(1e-12));
    }
  CHECK(intersection_tail_bound(36, 3) == doctest::Approx(0.001203859994828204).epsilon(1e-12));
  CHECK(intersection_tail_bound(36, 3) ==
        doctest::Approx(std::exp(-2.0 * 4.0 * (11.0 / 12) * (11.0 / 12))).epsilon(1e-12));
}

TEST_CASE("overlap probabilities are a distribution") {
  for (std::size_t n : {6, 10, 20}) {
    for (std::size_t k : {1, 2, 3}) {
      double total = 0.0;
      for (std::size_t j = 0; j <= k; ++j) total += overlap_probability(n, k, j);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(overlap_probability(6, 2, 0) == doctest::Approx(1.0 / 15));
}

TEST_CASE("pass rules") {
  CHECK(make_bound_check("a", 0.9, 0.1, 1.0, BoundDirection::LowerBound, 10).pass);
  CHECK(!make_bound_check("a", 0.6, 0.1, 1.0, BoundDirection::LowerBound, 10).pass);
  CHECK(make_bound_check("a", 1.2, 0.1, 1.0, BoundDirection::UpperBound, 10).pass);
  CHECK(!make_bound_check("a", 1.4, 0.1, 1.0, BoundDirection::UpperBound, 10).pass);
  CHECK(make_bound_check("a", 1.25, 0.1, 1.0, BoundDirection::Equality, 10).pass);
  CHECK(!make_bound_check("a", 0.65, 0.1, 1.0, BoundDirection::Equality, 10).pass);
  CHECK(binomial_std_error(50, 100) == doctest::Approx(0.05));
  const Interval w = wilson_interval(0, 100000);
  CHECK(w.low == 0.0);
  CHECK(w.high == doctest::Approx(9.0 / 100009.0).epsilon(1e-9));
  const Interval m = wilson_interval(500, 1000);
  CHECK(m.low < 0.5);
  CHECK(m.high > 0.5);
  CHECK(m.high - 0.5 == doctest::Approx(0.5 - m.low));
}

TEST_CASE("chi-squared tails") {
  const ChiSquaredTails r = check_chi_squared_tails(1, 4.0, 200000, {1, 0});
  CHECK(r.upper.bound == doctest::Approx(0.01831563888873418));
  CHECK(r.upper.pass);
  CHECK(r.lower.pass);
  const ChiSquaredTails far = check_chi_squared_tails(16, 40.0, 100000, {1, 0});
  CHECK(far.upper.estimate == 0.0);
  CHECK(far.lower.estimate == 0.0);
  const ChiSquaredTails mid = check_chi_squared_tails(16, 1.0, 100000, {2, 0});
  CHECK(mid.upper.pass);
  CHECK(mid.lower.pass);
  CHECK_THROWS_AS(check_chi_squared_tails(0, 1.0, 10, {}), ParameterError);
  CHECK_THROWS_AS(check_chi_squared_tails(1, 0.0, 10, {}), ParameterError);
}

TEST_CASE("most probable interval") {
  const BoundCheckResult same = check_most_probable_interval(1.0, 0.0, 0.1, 50000, {3, 0});
  CHECK(same.estimate == same.bound);
  CHECK(same.pass);
  const BoundCheckResult shifted = check_most_probable_interval(1.0, 2.0, 0.1, 50000, {3, 0});
  CHECK(shifted.pass);
  CHECK(shifted.estimate < shifted.bound);
  const BoundCheckResult far = check_most_probable_interval(1.0, 50.0, 0.1, 50000, {3, 0});
  CHECK(far.estimate == 0.0);
  CHECK_THROWS_AS(check_most_probable_interval(0.0, 0.0, 0.1, 10, {}), ParameterError);
}

TEST_CASE("NSN hit lower bound") {
  const BoundCheckResult r = check_nsn_hit_lower_bound(1, 64, 0.2, {0.0}, 20000, {4, 0});
  CHECK(r.pass);
  CHECK(r.direction == BoundDirection::LowerBound);
  CHECK(r.bound == doctest::Approx(nsn_hit_bound(1, 64, 0.2)));
  CHECK_THROWS_AS(check_nsn_hit_lower_bound(1, 8, 0.2, {0.0}, 10, {}), ParameterError);
  CHECK_THROWS_AS(check_nsn_hit_lower_bound(1, 64, 0.3, {0.0}, 10, {}), ParameterError);
  CHECK_THROWS_AS(check_nsn_hit_lower_bound(1, 64, 0.2, {9.0}, 10, {}), ParameterError);
  CHECK_THROWS_AS(check_nsn_hit_lower_bound(2, 64, 0.2, {0.0}, 10, {}), ParameterError);
}

TEST_CASE("joint upper bound") {
  const BoundCheckResult r = check_joint_upper_bound(1, 64, 64, 0.1, {0.0}, 20000, {5, 0});
  CHECK(r.pass);
  const BoundCheckResult tiny = check_joint_upper_bound(1, 64, 8, 1e-9, {0.0}, 5000, {5, 0});
  CHECK(tiny.estimate == 0.0);
  CHECK_THROWS_AS(check_joint_upper_bound(1, 32, 8, 0.1, {0.0}, 10, {}), ParameterError);
  CHECK_THROWS_AS(check_joint_upper_bound(1, 64, 65, 0.1, {0.0}, 10, {}), ParameterError);
}

TEST_CASE("second-moment identity") {
  const SecondMomentReport r = check_second_moment_identity(6, 2, 1, 0.3, {0.0}, 5000, {6, 0});
  CHECK(r.pass());
  CHECK(r.first_moment.bound == doctest::Approx(15.0 * r.p_s0));
  CHECK(r.pair_probability[0] == doctest::Approx(r.p_s0));

  const SecondMomentReport single = check_second_moment_identity(3, 3, 2, 0.5, {0.0, 0.0}, 2000, {6, 1});
  CHECK(single.mean_t2 == single.mean_t);
  CHECK(single.pass());

  const SecondMomentReport huge = check_second_moment_identity(6, 2, 1, 1e6, {0.0}, 200, {6, 2});
  CHECK(huge.mean_t == 15.0);
  CHECK(huge.mean_t2 == 225.0);
  CHECK(huge.first_moment.estimate == huge.first_moment.bound);
  CHECK(huge.second_moment.estimate == doctest::Approx(huge.second_moment.bound));

  CHECK_THROWS_AS(check_second_moment_identity(11, 2, 1, 0.3, {0.0}, 10, {}), BudgetError);
  CHECK_THROWS_AS(check_second_moment_identity(8, 5, 1, 0.3, {0.0}, 10, {}), BudgetError);
}

TEST_CASE("intersection tail") {
  const BoundCheckResult r = check_intersection_tail(1296, 36, 3, 100000, {7, 0});
  CHECK(r.pass);
  CHECK_THROWS_AS(check_intersection_tail(1296, 3, 3, 10, {}), ParameterError);
  CHECK_THROWS_AS(check_intersection_tail(100, 36, 3, 10, {}), ParameterError);
  // Sparser ground sets shrink the overlap.
  const std::size_t dense = count_events(1, {}, "x", [](RandomStream&) { return true; });
  CHECK(dense == 1);
  const BoundCheckResult loose = check_intersection_tail(64, 8, 2, 50000, {7, 1});
  const BoundCheckResult sparse = check_intersection_tail(640, 8, 2, 50000, {7, 1});
  CHECK(sparse.estimate <= loose.estimate);
}

TEST_CASE("bound checks are reproducible") {
  LemmaCheckPlan plan;
  plan.seed = {8, 0};
  plan.tail_trials = 2000;
  plan.hit_trials = 2000;
  plan.moment_trials = 500;
  const std::string a = bound_checks_csv(run_lemma_checks(plan));
  const std::string b = bound_checks_csv(run_lemma_checks(plan));
  CHECK(a == b);
  CHECK(a.rfind("name,estimate,std_error,bound,direction,trials,pass\n", 0) == 0);
}

TEST_CASE("rssp scan") {
  RsspScanPlan loose;
  loose.epsilon = 0.5;
  loose.n_list = {10};
  loose.trials = 100;
  loose.seed = {9, 0};
  CHECK(scan_rssp_phase(loose)[0].rate >= 0.99);

  RsspScanPlan plan;
  plan.n_list = {1, 5, 10, 15, 20};
  plan.trials = 60;
  plan.seed = {9, 1};
  const auto rows = scan_rssp_phase(plan);
  CHECK(rows[0].successes == 0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].successes >= rows[i - 1].successes);
  for (const PhaseRow& r : rows) {
    CHECK(r.wilson_low <= r.rate);
    CHECK(r.rate <= r.wilson_high);
  }
  const std::string csv = rssp_phase_csv(plan, rows);
  CHECK(csv == rssp_phase_csv(plan, scan_rssp_phase(plan)));
  CHECK(csv.rfind("n,trials,successes,rate,wilson_low,wilson_high,epsilon,grid_size,master_seed,stream_id\n", 0) == 0);
  RsspScanPlan big = plan;
  big.n_list = {64};
  CHECK_THROWS_AS(scan_rssp_phase(big), CapacityError);
}

TEST_CASE("mrss scan is monotone and boosting helps") {
  MrssScanPlan plan;
  plan.d = 2;
  plan.k = 2;
  plan.n_list = {4, 8, 12, 16};
  plan.trials = 60;
  plan.epsilon = 0.1;
  plan.seed = {10, 0};
  const auto rows = scan_mrss_phase(plan);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].successes >= rows[i - 1].successes);

  MrssScanPlan boost = plan;
  boost.n_list = {16};
  boost.group_size = 8;
  MrssScanPlan single = plan;
  single.n_list = {8};
  CHECK(scan_mrss_phase(boost)[0].successes >= scan_mrss_phase(single)[0].successes);
  CHECK(mrss_phase_csv(plan, rows).find(",enum,0,10,0\n") != std::string::npos);
}

TEST_CASE("singleton targets are always hit") {
  const NsnEnsemble e = sample_nsn(12, 3, {11, 0});
  const VectorSet vs = VectorSet::of(e);
  SolverParams p;
  p.k = 1;
  p.epsilon = 1e-12;
  for (std::size_t i = 0; i < vs.count(); ++i) {
    const std::vector<double> z(vs.row(i).begin(), vs.row(i).end());
    CHECK(solve_mrss(vs, z, p).found());
  }
}

TEST_CASE("prune scan rows") {
  PruneScanPlan plan;
  plan.d = 1;
  plan.n_list = {8, 16};
  plan.trials = 4;
  plan.params.probe_count = 8;
  plan.params.seed = {12, 0};
  const auto rows = scan_prune_success(plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].phase.trials == 4);
  const std::string csv = prune_scan_csv(plan, rows);
  CHECK(csv == prune_scan_csv(plan, scan_prune_success(plan)));
  CHECK(format_double(0.1) == "0.10000000000000001");
}
