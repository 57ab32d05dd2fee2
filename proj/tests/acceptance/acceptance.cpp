// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [csv-dir]
// When csv-dir is given the CSV outputs of the first pass are written there.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "slth/harness.hpp"
#include "slth/masks.hpp"
#include "slth/pruning.hpp"
#include "slth/random.hpp"
#include "slth/subset_sum.hpp"
#include "slth/tensor.hpp"

using namespace slth;

namespace {

const SeedSpec kBase{1, 0};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string num(double x) { return fmt("%.4g", x); }

SeedSpec seed_for(const std::string& label, std::uint64_t i) {
  return derive_stream(kBase, hash_label(label), i);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Reports the worst check of a group, by margin to the 3-sigma limit.
Outcome summarize(const std::vector<BoundCheckResult>& checks) {
  Outcome o{true, ""};
  double worst = -INFINITY;
  const BoundCheckResult* w = nullptr;
  for (const BoundCheckResult& c : checks) {
    o.pass = o.pass && c.pass;
    double margin = 0.0;
    switch (c.direction) {
      case BoundDirection::UpperBound: margin = c.estimate - c.bound - 3 * c.std_error; break;
      case BoundDirection::LowerBound: margin = c.bound - c.estimate - 3 * c.std_error; break;
      case BoundDirection::Equality:
        margin = std::abs(c.estimate - c.bound) - 3 * c.std_error;
        break;
    }
    if (w == nullptr || (!c.pass && w->pass) || (c.pass == w->pass && margin > worst)) {
      worst = margin;
      w = &c;
    }
  }
  std::size_t failed = 0;
  for (const BoundCheckResult& c : checks) failed += !c.pass;
  o.detail = std::to_string(checks.size() - failed) + "/" + std::to_string(checks.size()) +
             " checks pass";
  if (w) {
    o.detail += "; tightest " + w->name + ": estimate " + num(w->estimate) + " vs bound " +
                num(w->bound) + " (" + direction_name(w->direction) + ", se " +
                num(w->std_error) + ")";
  }
  return o;
}

// ---- criterion 1 ------------------------------------------------------------

Outcome drop_relu_identity() {
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RandomStream r(seed_for("drop-relu", i));
    const std::size_t D = 1 + r.below(6), c = 1 + r.below(3), n = 1 + r.below(4);
    const Tensor4 v = sample_normal_tensor({1, 1, c, 2 * n * c}, seed_for("drop-relu/v", i));
    const DropReluMasks m = drop_relu_decompose(v, channel_blocked_mask(1, c, 2 * n));
    const Tensor4 vt = apply_mask(v, m.combined);
    const FeatureMap x =
        sample_uniform_feature_map(D, D, c, -1.0, 1.0, seed_for("drop-relu/x", i));
    const FeatureMap lhs = relu(conv(vt, x));
    const FeatureMap rhs =
        add(conv(pos_part(vt), pos_part(x)), conv(neg_part(vt), neg_part(x)));
    for (std::size_t e = 0; e < lhs.size(); ++e) {
      const double a = lhs.values()[e], b = rhs.values()[e];
      const double scale = std::max(std::abs(a), std::abs(b));
      const double rel = scale > 0.0 ? std::abs(a - b) / scale : 0.0;
      worst = std::max(worst, rel);
      bad += rel > 1e-9;
    }
  }
  return {bad == 0, "1000 instances, " + std::to_string(bad) +
                        " entries off, max relative difference " + num(worst)};
}

// ---- criterion 2 ------------------------------------------------------------

// Every fourth pair puts the sign pattern of a single-kernel K under one
// output, where the bound is attained.
Outcome convolution_inequality() {
  std::size_t bad = 0;
  double tightest = INFINITY;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RandomStream r(seed_for("conv-ineq", i));
    const bool tight = i % 4 == 0;
    const std::size_t d = 1 + r.below(5), c = 1 + r.below(3);
    const std::size_t kernels = tight ? 1 : 1 + r.below(3);
    const std::size_t D = d + r.below(5);
    const double m = tight ? 1.0 : 0.5 + 1.5 * r.uniform();
    const Tensor4 k = sample_normal_tensor({d, d, c, kernels}, seed_for("conv-ineq/k", i));
    FeatureMap x = sample_uniform_feature_map(D, D, c, -m, m, seed_for("conv-ineq/x", i));
    if (tight) {
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          for (std::size_t t = 0; t < c; ++t)
            x.at(D - 1 - a, D - 1 - b, t) = k.at(a, b, t, 0) < 0 ? -m : m;
    }
    const double lhs = norm_max(conv(k, x));
    const double rhs = norm_l1(k) * norm_max(x);
    bad += !(lhs <= rhs + 1e-12);
    tightest = std::min(tightest, rhs - lhs);
  }
  return {bad == 0, "1000 pairs (250 at equality), " + std::to_string(bad) +
                        " violations, smallest slack " + num(tightest)};
}

// ---- criteria 3 to 7 --------------------------------------------------------

std::vector<BoundCheckResult> chi_squared_checks() {
  std::vector<BoundCheckResult> out;
  for (std::size_t d : {1, 4, 16}) {
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      const ChiSquaredTails tails = check_chi_squared_tails(d, t, 1'000'000, kBase);
      out.push_back(tails.upper);
      out.push_back(tails.lower);
    }
  }
  return out;
}

std::vector<BoundCheckResult> nsn_hit_checks() {
  std::vector<BoundCheckResult> out;
  for (std::size_t d : {1, 2, 3}) {
    out.push_back(
        check_nsn_hit_lower_bound(d, 64, 0.2, std::vector<double>(d, 0.0), 100'000, kBase));
  }
  return out;
}

std::vector<BoundCheckResult> joint_checks() {
  std::vector<BoundCheckResult> out;
  for (std::size_t d : {1, 2}) {
    for (std::size_t j : {8, 32, 64}) {
      out.push_back(check_joint_upper_bound(d, 64, j, 0.1, std::vector<double>(d, 0.0),
                                            100'000, kBase));
    }
  }
  return out;
}

std::vector<BoundCheckResult> second_moment_checks() {
  const SecondMomentReport r = check_second_moment_identity(6, 2, 1, 0.3, {0.0}, 20'000, kBase);
  return {r.first_moment, r.second_moment};
}

std::vector<BoundCheckResult> intersection_checks() {
  return {check_intersection_tail(1296, 36, 3, 1'000'000, kBase)};
}

// ---- criterion 8 ------------------------------------------------------------

RsspScanPlan rssp_plan() {
  RsspScanPlan p;
  p.epsilon = 0.05;
  p.grid_size = 41;
  p.trials = 200;
  p.n_list = {10, 20, 30, 40, 50, 60};
  p.seed = kBase;
  return p;
}

Outcome rssp_phase(const std::vector<PhaseRow>& rows) {
  bool monotone = true;
  std::string rates;
  std::size_t reversals = 0;
  for (std::size_t c = 0; c < rows.size(); ++c) {
    rates += (c ? " " : "") + std::to_string(rows[c].n) + ":" + num(rows[c].rate);
    if (c == 0) continue;
    const PhaseRow &a = rows[c - 1], &b = rows[c];
    // paired difference b - a per trial
    const double t = static_cast<double>(a.trials);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < a.trials; ++i) {
      const double diff = static_cast<double>(b.trial_success[i]) - a.trial_success[i];
      sum += diff;
      sq += diff * diff;
      reversals += diff < 0;
    }
    const double mean = sum / t;
    const double var = t > 1 ? (sq - t * mean * mean) / (t - 1) : 0.0;
    const double se = std::sqrt(std::max(0.0, var) / t);
    monotone = monotone && mean >= -3.0 * se;
  }
  const double last = rows.back().rate;
  return {monotone && last >= 0.95, "rates " + rates + "; " + std::to_string(reversals) +
                                        " paired reversals; rate at n=60 " + num(last) +
                                        " (need >= 0.95)"};
}

// ---- criterion 9 ------------------------------------------------------------

std::vector<std::vector<double>> targets_in_ball(std::size_t count, std::size_t d, SeedSpec s) {
  RandomStream r(s);
  std::vector<std::vector<double>> out(count, std::vector<double>(d));
  for (auto& z : out)
    for (double& v : z) v = r.uniform(-1.0, 1.0) / static_cast<double>(d);
  return out;
}

Outcome solver_equivalence(std::string& csv) {
  std::size_t subset_violations = 0, number_mismatches = 0;
  std::string counts;
  csv = "d,instance,epsilon,enum_found,greedy_found,subset_sum_number\n";
  for (std::size_t d : {1, 2}) {
    const double eps = d == 1 ? 0.02 : 0.15;
    std::size_t en_hits = 0, gr_hits = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const NsnEnsemble e = sample_nsn(10, d, seed_for("equivalence/ensemble/d=" +
                                                           std::to_string(d), i));
      const VectorSet vs = VectorSet::of(e);
      const std::vector<double> z =
          targets_in_ball(1, d, seed_for("equivalence/target/d=" + std::to_string(d), i))[0];
      SolverParams p;
      p.k = 3;
      p.epsilon = eps;
      p.seed = seed_for("equivalence/greedy/d=" + std::to_string(d), i);
      p.strategy = ExhaustiveEnum{};
      const bool en = solve_mrss(vs, z, p).found();
      p.strategy = GreedySwap{};
      const bool gr = solve_mrss(vs, z, p).found();
      const std::uint64_t number = subset_sum_number(vs, z, 3, eps);
      subset_violations += gr && !en;
      number_mismatches += (number > 0) != en;
      en_hits += en;
      gr_hits += gr;
      csv += std::to_string(d) + "," + std::to_string(i) + "," + format_double(eps) + "," +
             std::to_string(en) + "," + std::to_string(gr) + "," + std::to_string(number) + "\n";
    }
    counts += (counts.empty() ? "" : ", ") + std::string("d=") + std::to_string(d) + " eps=" +
              num(eps) + ": enum " + std::to_string(en_hits) + "/100, greedy " +
              std::to_string(gr_hits) + "/100";
  }
  return {subset_violations == 0 && number_mismatches == 0,
          counts + "; " + std::to_string(subset_violations) + " greedy-only successes, " +
              std::to_string(number_mismatches) + " count mismatches"};
}

// ---- criterion 10 -----------------------------------------------------------

// Largest residual of the selected subset, recomputed from U, V and K.
double direct_residual(const LayerInstance& inst, const ChannelResult& ch) {
  const Tensor4& u = inst.u;
  double worst = 0.0;
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < u.cols(); ++j)
      for (std::size_t l = 0; l < u.kernels(); ++l) {
        double s = 0.0;
        for (std::size_t k : ch.selected) s += u.at(i, j, k, l) * std::abs(inst.v.at(0, 0, ch.channel, k));
        worst = std::max(worst, std::abs(s - ch.sign * inst.k.at(i, j, ch.channel, l)));
      }
  return worst;
}

struct LayerTally {
  std::size_t runs = 0;
  std::size_t full = 0;
  std::size_t success_channels = 0;
  std::size_t reverify_failures = 0;
  std::size_t bound_failures = 0;
  std::vector<double> probe_errors;
};

void tally(LayerTally& t, const LayerInstance& inst, const PrunedLayer& out, double eps_m) {
  ++t.runs;
  for (const ChannelResult& ch : out.report.channels) {
    if (!ch.success) continue;
    ++t.success_channels;
    t.reverify_failures += !(direct_residual(inst, ch) <= out.report.tolerance);
  }
  if (out.report.all_success()) {
    ++t.full;
    t.bound_failures += !(out.report.probe_error <= eps_m);
  }
  t.probe_errors.push_back(out.report.probe_error);
}

Outcome single_layer(std::string& csv) {
  const std::size_t d = 2;
  PruneParams base;
  base.epsilon = 0.25;
  base.input_bound = 1.0;
  LayerTally g48, g96, x48;
  csv = "target,n,strategy,all_success,success_channels,probe_error,certified_ratio\n";
  auto row = [&](std::uint64_t i, std::size_t n, const char* s, const PrunedLayer& out) {
    std::size_t ok = 0;
    for (const ChannelResult& ch : out.report.channels) ok += ch.success;
    csv += std::to_string(i) + "," + std::to_string(n) + "," + s + "," +
           std::to_string(out.report.all_success()) + "," + std::to_string(ok) + "," +
           format_double(out.report.probe_error) + "," +
           format_double(out.report.certified_ratio) + "\n";
  };
  for (std::uint64_t i = 0; i < 50; ++i) {
    const SeedSpec is = seed_for("single-layer/instance", i);
    PruneParams p = base;
    p.seed = seed_for("single-layer/prune", i);
    const LayerInstance a = sample_layer_instance(d, 1, 1, 48, is);
    const LayerInstance b = sample_layer_instance(d, 1, 1, 96, is);
    const PrunedLayer oa = prune_single_layer(a.u, a.v, a.k, p);
    const PrunedLayer ob = prune_single_layer(b.u, b.v, b.k, p);
    tally(g48, a, oa, p.epsilon * p.input_bound);
    tally(g96, b, ob, p.epsilon * p.input_bound);
    row(i, 48, "greedy", oa);
    row(i, 96, "greedy", ob);

    PruneParams exact = p;
    exact.strategy = MeetInTheMiddle{};
    exact.k_budget = 48;
    const PrunedLayer ox = prune_single_layer(a.u, a.v, a.k, exact);
    tally(x48, a, ox, p.epsilon * p.input_bound);
    row(i, 48, "mitm", ox);
  }
  const double m48 = median(g48.probe_errors), m96 = median(g96.probe_errors);
  const std::size_t reverify = g48.reverify_failures + g96.reverify_failures + x48.reverify_failures;
  const std::size_t bound = g48.bound_failures + g96.bound_failures + x48.bound_failures;
  const std::size_t channels = g48.success_channels + g96.success_channels + x48.success_channels;
  const std::size_t full = g48.full + g96.full + x48.full;
  return {reverify == 0 && bound == 0 && m96 <= m48,
          std::to_string(channels) + " successful channels re-verified (" +
              std::to_string(reverify) + " failures); fully successful targets: greedy n=48 " +
              std::to_string(g48.full) + "/50, greedy n=96 " + std::to_string(g96.full) +
              "/50, exact n=48 " + std::to_string(x48.full) + "/50, " + std::to_string(bound) +
              " of " + std::to_string(full) + " above eps*M; median probe error n=48 " + num(m48) +
              ", n=96 " + num(m96)};
}

// ---- criterion 11 -----------------------------------------------------------

Outcome multi_layer(std::string& csv) {
  NetworkSpec spec;
  spec.depth = 2;
  spec.spatial = 4;
  spec.channels = {1, 2, 1};
  spec.kernel_sizes = {2, 2};
  spec.overparam = {48, 48};
  const std::size_t runs = 10;
  std::size_t full = 0, composed_fail = 0, certified_fail = 0, mask_fail = 0, channels = 0,
              channel_ok = 0;
  double worst_ratio = 0.0;
  csv = "run,all_success,failures,empirical_error,composed_bound,certified_bound\n";
  std::size_t exact_full = 0, exact_infeasible = 0, exact_solved = 0, exact_channels = 0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    PruneParams p;
    p.epsilon = 0.5;
    p.input_bound = 1.0;
    p.probe_count = 256;
    p.seed = seed_for("multi-layer/prune", r);
    const auto random = sample_random_network(spec, seed_for("multi-layer/network", r));
    const auto targets = sample_target_network(spec, seed_for("multi-layer/targets", r));
    const PrunedNetwork net = prune_network(spec, random, targets, p);
    const PruneReport& rep = net.report;

    // Exact search on the same instance settles whether any subset exists.
    PruneParams exact = p;
    exact.strategy = MeetInTheMiddle{};
    exact.k_budget = spec.overparam[0];
    const PrunedNetwork xnet = prune_network(spec, random, targets, exact);
    for (const LayerReport& l : xnet.report.layers) {
      exact_channels += l.channels.size();
      for (const ChannelResult& c : l.channels) {
        exact_infeasible += c.status == SolveStatus::ProvenInfeasible;
        exact_solved += c.success;
      }
    }
    certified_fail += !(xnet.report.empirical_error <= xnet.report.certified_bound + 1e-9);
    if (xnet.report.all_success()) {
      ++exact_full;
      composed_fail += !(xnet.report.empirical_error <= xnet.report.composed_bound + 1e-9);
    }
    for (std::size_t i = 0; i < net.masks.size(); ++i) {
      const Mask4& m = net.masks[i];
      mask_fail += !(validate_structure(m).valid &&
                     is_blocked_filter_composite(m.kind(), 2 * spec.overparam[i]));
    }
    for (const LayerReport& l : rep.layers) {
      channels += l.channels.size();
      for (const ChannelResult& c : l.channels) channel_ok += c.success;
    }
    certified_fail += !(rep.empirical_error <= rep.certified_bound + 1e-9);
    if (rep.all_success()) {
      ++full;
      composed_fail += !(rep.empirical_error <= rep.composed_bound + 1e-9);
    }
    worst_ratio = std::max(worst_ratio, rep.empirical_error / rep.composed_bound);
    csv += std::to_string(r) + "," + std::to_string(rep.all_success()) + "," +
           std::to_string(rep.failures.size()) + "," + format_double(rep.empirical_error) + "," +
           format_double(rep.composed_bound) + "," + format_double(rep.certified_bound) + "\n";
  }
  std::string detail = std::to_string(full) + "/" + std::to_string(runs) +
                       " runs fully successful (" + std::to_string(channel_ok) + "/" +
                       std::to_string(channels) + " channels)";
  detail += "; exact search: " + std::to_string(exact_full) + "/" + std::to_string(runs) +
            " fully successful, " + std::to_string(exact_solved) + "/" +
            std::to_string(exact_channels) + " channels solved, " +
            std::to_string(exact_infeasible) + "/" +
            std::to_string(exact_channels) + " channels proven infeasible";
  if (full + exact_full == 0) detail += "; composed bound not exercised";
  detail += "; " + std::to_string(composed_fail) + " composed-bound violations, " +
            std::to_string(certified_fail) + " certified-bound violations, " +
            std::to_string(mask_fail) + " invalid masks; max empirical/composed " +
            num(worst_ratio);
  return {composed_fail == 0 && certified_fail == 0 && mask_fail == 0, detail};
}

// ---- criterion 12 -----------------------------------------------------------

MrssScanPlan mrss_plan() {
  MrssScanPlan p;
  p.d = 2;
  p.k = 2;
  p.n_list = {4, 8, 12};
  p.epsilon = 0.1;
  p.trials = 100;
  p.seed = kBase;
  return p;
}

PruneScanPlan prune_plan() {
  PruneScanPlan p;
  p.d = 2;
  p.n_list = {12, 24, 48};
  p.trials = 10;
  p.params.probe_count = 32;
  return p;
}

using CsvSet = std::map<std::string, std::string>;

// Producers not already run by an earlier criterion.
void extra_csvs(CsvSet& csvs) {
  const MrssScanPlan mp = mrss_plan();
  csvs["mrss_scan.csv"] = mrss_phase_csv(mp, scan_mrss_phase(mp));
  const PruneScanPlan pp = prune_plan();
  csvs["prune_scan.csv"] = prune_scan_csv(pp, scan_prune_success(pp));
}

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CsvSet first;
  std::vector<BoundCheckResult> lemma_rows;
  auto lemma = [&](std::vector<BoundCheckResult> (*make)()) {
    return [&lemma_rows, make] {
      const std::vector<BoundCheckResult> r = make();
      lemma_rows.insert(lemma_rows.end(), r.begin(), r.end());
      return summarize(r);
    };
  };

  // The second pass reruns every CSV producer with the same seeds.
  auto rerun_all = [] {
    CsvSet csvs;
    std::vector<BoundCheckResult> rows;
    for (auto make : {chi_squared_checks, nsn_hit_checks, joint_checks, second_moment_checks,
                      intersection_checks}) {
      const auto r = make();
      rows.insert(rows.end(), r.begin(), r.end());
    }
    csvs["lemma_checks.csv"] = bound_checks_csv(rows);
    const RsspScanPlan rp = rssp_plan();
    csvs["rssp_scan.csv"] = rssp_phase_csv(rp, scan_rssp_phase(rp));
    solver_equivalence(csvs["solver_equivalence.csv"]);
    single_layer(csvs["single_layer.csv"]);
    multi_layer(csvs["multi_layer.csv"]);
    extra_csvs(csvs);
    return csvs;
  };

  const std::vector<Criterion> criteria = {
      {1, "drop-relu identity", 10, drop_relu_identity},
      {2, "tensor convolution inequality", 10, convolution_inequality},
      {3, "chi-squared tails", 120, lemma(chi_squared_checks)},
      {4, "nsn hit lower bound", 60, lemma(nsn_hit_checks)},
      {5, "joint upper bound", 120, lemma(joint_checks)},
      {6, "second-moment identity", 60, lemma(second_moment_checks)},
      {7, "intersection tail", 60, lemma(intersection_checks)},
      {8, "rssp phase behavior", 300,
       [&] {
         const RsspScanPlan p = rssp_plan();
         const std::vector<PhaseRow> rows = scan_rssp_phase(p);
         first["lemma_checks.csv"] = bound_checks_csv(lemma_rows);
         first["rssp_scan.csv"] = rssp_phase_csv(p, rows);
         return rssp_phase(rows);
       }},
      {9, "solver oracle equivalence", 30,
       [&] { return solver_equivalence(first["solver_equivalence.csv"]); }},
      {10, "single-layer pruning", 180, [&] { return single_layer(first["single_layer.csv"]); }},
      {11, "multi-layer composition", 180, [&] { return multi_layer(first["multi_layer.csv"]); }},
      {12, "determinism", 0,
       [&] {
         extra_csvs(first);
         const CsvSet second = rerun_all();
         std::size_t same = 0;
         std::string diff;
         for (const auto& [name, text] : first) {
           const auto it = second.find(name);
           if (it != second.end() && it->second == text) {
             ++same;
           } else {
             diff += " " + name;
           }
         }
         return Outcome{same == first.size() && second.size() == first.size(),
                        std::to_string(same) + "/" + std::to_string(first.size()) +
                            " CSV outputs byte-identical on rerun" +
                            (diff.empty() ? "" : ", differing:" + diff)};
       }},
  };

  bool all = true;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      o.pass = false;
      o.detail += "; over the " + num(c.limit_s) + " s limit";
    }
    all = all && o.pass;
    std::printf("[%2d] %s  %s: %s (%.2f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }

  if (argc > 1) {
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : first) std::ofstream(dir / name, std::ios::binary) << text;
  }
  return all ? 0 : 1;
}
