#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slth/error.hpp"
#include "slth/harness.hpp"
#include "slth/masks.hpp"
#include "slth/pruning.hpp"

namespace {

using namespace slth;

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBudget = 3;

struct Globals {
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::optional<std::size_t> trials;
  std::string out;
  std::string strategy;
};

struct PruneOptions {
  double epsilon = 0.25;
  double input_bound = 1.0;
  std::size_t k_budget = 0;  // 0 = default
  std::string mode = "at-most";
  std::size_t probes = 256;
  std::size_t probe_spatial = 4;
  std::size_t budget = kDefaultEnumerationBudget;
};

void add_prune_options(CLI::App* cmd, PruneOptions& o) {
  cmd->add_option("--epsilon", o.epsilon, "target accuracy")->capture_default_str();
  cmd->add_option("--input-bound", o.input_bound, "M, probes lie in [-M, M]")
      ->capture_default_str();
  cmd->add_option("--k-budget", o.k_budget, "subset cardinality cap, 0 = default")
      ->capture_default_str();
  cmd->add_option("--mode", o.mode, "cardinality mode")
      ->check(CLI::IsMember({"exact", "at-most"}))
      ->capture_default_str();
  cmd->add_option("--probes", o.probes, "uniform probe inputs")->capture_default_str();
  cmd->add_option("--probe-spatial", o.probe_spatial, "single-layer probe size")
      ->capture_default_str();
  cmd->add_option("--budget", o.budget, "enumeration budget")->capture_default_str();
}

PruneParams make_params(const PruneOptions& o, const Globals& g) {
  PruneParams p;
  p.epsilon = o.epsilon;
  p.input_bound = o.input_bound;
  if (o.k_budget > 0) p.k_budget = o.k_budget;
  p.mode = o.mode == "exact" ? CardinalityMode::Exact : CardinalityMode::AtMost;
  p.probe_count = o.probes;
  p.probe_spatial = o.probe_spatial;
  p.enumeration_budget = o.budget;
  p.seed = {g.seed, g.stream};
  if (!g.strategy.empty()) p.strategy = parse_strategy(g.strategy);
  p.validate();
  return p;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) throw ParameterError("cannot open '" + g.out + "' for writing");
  f << text;
}

bool starts_with_mask_magic(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  char magic[4] = {};
  f.read(magic, 4);
  return f.gcount() == 4 && std::string(magic, 4) == "SLTM";
}

std::string bundle_summary(const PruneBundle& b) {
  std::ostringstream os;
  os << "depth " << b.spec.depth << ", spatial " << b.spec.spatial << ", epsilon "
     << format_double(b.params.epsilon) << ", M " << format_double(b.params.input_bound)
     << "\n";
  for (const LayerReport& r : b.report.layers) {
    std::size_t ok = 0;
    for (const ChannelResult& c : r.channels) ok += c.success;
    os << "layer " << r.layer << ": n " << r.n << ", k " << r.k_budget << ", kept "
       << r.kept_filters << "/" << r.total_filters << " filters, channels " << ok << "/"
       << r.channels.size() << ", certified ratio " << format_double(r.certified_ratio)
       << "\n";
    for (const std::string& w : r.warnings) os << "  warning: " << w << "\n";
  }
  for (std::size_t i = 0; i < b.masks.size(); ++i) {
    os << "mask " << i << ": " << b.masks[i].kind().describe() << "\n";
  }
  os << "failures " << b.report.failures.size() << "\n"
     << "probes " << b.report.probes << "\n"
     << "empirical error " << format_double(b.report.empirical_error) << "\n"
     << "median error " << format_double(b.report.median_error) << "\n"
     << "composed bound " << format_double(b.report.composed_bound) << "\n"
     << "certified bound " << format_double(b.report.certified_bound) << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured lottery-ticket toolkit: subset-sum solvers, pruning, and "
               "Monte Carlo checks"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);
  Globals g;
  bool echo_config = false;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--stream", g.stream, "stream id")->capture_default_str();
  app.add_option("--trials", g.trials, "trial count (overrides per-command defaults)");
  app.add_option("--out", g.out, "output path, stdout when omitted");
  app.add_option("--strategy", g.strategy, "enum | mitm | greedy");
  app.add_flag("--echo-config", echo_config,
               "print the effective configuration to stderr before running");

  // lemma-check
  auto* lemma = app.add_subcommand("lemma-check", "Monte Carlo checks of every closed-form bound");
  LemmaCheckPlan lemma_plan;
  lemma->add_option("--tail-trials", lemma_plan.tail_trials)->capture_default_str();
  lemma->add_option("--hit-trials", lemma_plan.hit_trials)->capture_default_str();
  lemma->add_option("--moment-trials", lemma_plan.moment_trials)->capture_default_str();

  // rssp-scan
  auto* rssp = app.add_subcommand("rssp-scan", "1-D cover success rate against n");
  RsspScanPlan rssp_plan;
  rssp_plan.n_list = {10, 20, 30, 40, 50, 60};
  rssp->add_option("--epsilon", rssp_plan.epsilon)->capture_default_str();
  rssp->add_option("--n", rssp_plan.n_list, "list of n")->delimiter(',')->capture_default_str();
  rssp->add_option("--grid-size", rssp_plan.grid_size)->capture_default_str();

  // mrss-scan
  auto* mrss = app.add_subcommand("mrss-scan", "multidimensional hit rate against n");
  MrssScanPlan mrss_plan;
  mrss_plan.n_list = {4, 6, 8, 10, 12, 14, 16};
  std::size_t group_size = 0;
  mrss->add_option("--d", mrss_plan.d)->capture_default_str();
  mrss->add_option("--k", mrss_plan.k)->capture_default_str();
  mrss->add_option("--n", mrss_plan.n_list, "list of n")->delimiter(',')->capture_default_str();
  mrss->add_option("--epsilon", mrss_plan.epsilon)->capture_default_str();
  mrss->add_option("--radius", mrss_plan.target_radius, "targets have ||z||_1 <= radius")
      ->capture_default_str();
  mrss->add_option("--group-size", group_size, "partition-boost group size, 0 = off")
      ->capture_default_str();
  mrss->add_option("--budget", mrss_plan.enumeration_budget)->capture_default_str();

  // prune-one
  auto* one = app.add_subcommand("prune-one", "prune one random layer towards a random target");
  PruneOptions one_opts;
  std::size_t one_d = 2, one_c0 = 1, one_c1 = 1, one_n = 48;
  std::string mask_out;
  one->add_option("--d", one_d)->capture_default_str();
  one->add_option("--c0", one_c0)->capture_default_str();
  one->add_option("--c1", one_c1)->capture_default_str();
  one->add_option("--n", one_n)->capture_default_str();
  one->add_option("--mask-out", mask_out, "write the binary mask here");
  add_prune_options(one, one_opts);

  // prune-net
  auto* net = app.add_subcommand("prune-net", "prune a random network towards a random target");
  PruneOptions net_opts;
  net_opts.epsilon = 0.5;
  NetworkSpec spec;
  spec.spatial = 4;
  spec.channels = {1, 2, 1};
  spec.kernel_sizes = {2, 2};
  spec.overparam = {48, 48};
  net->add_option("--spatial", spec.spatial)->capture_default_str();
  net->add_option("--channels", spec.channels, "c0 .. c_depth")->delimiter(',')->capture_default_str();
  net->add_option("--kernel-sizes", spec.kernel_sizes)->delimiter(',')->capture_default_str();
  net->add_option("--overparam", spec.overparam, "n per layer")->delimiter(',')->capture_default_str();
  add_prune_options(net, net_opts);

  // prune-scan
  auto* pscan = app.add_subcommand("prune-scan", "single-layer pruning success against n");
  PruneScanPlan pscan_plan;
  pscan_plan.n_list = {12, 24, 48, 96};
  PruneOptions pscan_opts;
  pscan_opts.probes = 64;
  pscan->add_option("--d", pscan_plan.d)->capture_default_str();
  pscan->add_option("--c0", pscan_plan.c0)->capture_default_str();
  pscan->add_option("--c1", pscan_plan.c1)->capture_default_str();
  pscan->add_option("--n", pscan_plan.n_list, "list of n")->delimiter(',')->capture_default_str();
  add_prune_options(pscan, pscan_opts);

  // dump-report
  auto* dump = app.add_subcommand("dump-report", "print a pruning bundle or a binary mask");
  std::string dump_path;
  bool recompute = false;
  dump->add_option("path", dump_path, "bundle JSON or mask file")->required();
  dump->add_flag("--recompute", recompute,
                 "re-evaluate a bundle and fail if the stored error does not reproduce");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (echo_config) std::cerr << app.config_to_str(true, true);

  try {
    const SeedSpec seed{g.seed, g.stream};
    if (*lemma) {
      lemma_plan.seed = seed;
      if (g.trials) {
        lemma_plan.tail_trials = lemma_plan.hit_trials = lemma_plan.moment_trials = *g.trials;
      }
      const auto results = run_lemma_checks(lemma_plan);
      emit(g, bound_checks_csv(results));
      bool all = true;
      for (const auto& r : results) {
        if (!r.pass) {
          all = false;
          std::cerr << "FAIL " << r.name << ": estimate " << format_double(r.estimate)
                    << " bound " << format_double(r.bound) << "\n";
        }
      }
      return all ? kExitOk : kExitAssertion;
    }
    if (*rssp) {
      rssp_plan.seed = seed;
      if (g.trials) rssp_plan.trials = *g.trials;
      emit(g, rssp_phase_csv(rssp_plan, scan_rssp_phase(rssp_plan)));
      return kExitOk;
    }
    if (*mrss) {
      mrss_plan.seed = seed;
      if (g.trials) mrss_plan.trials = *g.trials;
      if (!g.strategy.empty()) mrss_plan.strategy = parse_strategy(g.strategy);
      if (group_size > 0) mrss_plan.group_size = group_size;
      emit(g, mrss_phase_csv(mrss_plan, scan_mrss_phase(mrss_plan)));
      return kExitOk;
    }
    if (*one) {
      const PruneParams params = make_params(one_opts, g);
      const LayerInstance inst =
          sample_layer_instance(one_d, one_c0, one_c1, one_n, derive_stream(seed, hash_label("instance"), 0));
      const PrunedLayer layer = prune_single_layer(inst.u, inst.v, inst.k, params);
      emit(g, layer_report_to_json(layer.report) + "\n");
      if (!mask_out.empty()) write_mask(layer.mask, mask_out);
      for (const ChannelResult& c : layer.report.channels) {
        if (c.success && c.residual > layer.report.tolerance) return kExitAssertion;
      }
      if (layer.report.all_success() && params.probe_count > 0 &&
          layer.report.probe_error > params.epsilon * params.input_bound + 1e-9) {
        return kExitAssertion;
      }
      return kExitOk;
    }
    if (*net) {
      spec.depth = spec.kernel_sizes.size();
      spec.validate();
      PruneBundle b;
      b.spec = spec;
      b.params = make_params(net_opts, g);
      b.network_seed = derive_stream(seed, hash_label("network"), 0);
      b.target_seed = derive_stream(seed, hash_label("targets"), 0);
      b.random_kernels = sample_random_network(spec, b.network_seed);
      b.targets = sample_target_network(spec, b.target_seed);
      PrunedNetwork pruned = prune_network(spec, b.random_kernels, b.targets, b.params);
      b.masks = pruned.masks;
      b.report = pruned.report;
      emit(g, bundle_to_json(b) + "\n");
      if (b.report.empirical_error > b.report.certified_bound + 1e-9) return kExitAssertion;
      if (b.report.all_success() && b.report.empirical_error > b.report.composed_bound + 1e-9) {
        return kExitAssertion;
      }
      return kExitOk;
    }
    if (*pscan) {
      pscan_plan.params = make_params(pscan_opts, g);
      if (g.trials) pscan_plan.trials = *g.trials;
      emit(g, prune_scan_csv(pscan_plan, scan_prune_success(pscan_plan)));
      return kExitOk;
    }
    if (*dump) {
      if (starts_with_mask_magic(dump_path)) {
        const Mask4 m = read_mask(dump_path);
        emit(g, dump_mask_text(m));
        return kExitOk;
      }
      const PruneBundle b = read_bundle(dump_path);
      std::string text = bundle_summary(b);
      int code = kExitOk;
      if (recompute) {
        const double again = recompute_empirical_error(b);
        text += "recomputed error " + format_double(again) + "\n";
        const double stored = b.report.empirical_error;
        if (!(std::abs(again - stored) <= 1e-12 * std::max(1.0, std::abs(stored)))) {
          code = kExitAssertion;
        }
      }
      emit(g, text);
      return code;
    }
  } catch (const BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kExitBudget;
  } catch (const CapacityError& e) {
    std::cerr << "capacity exceeded: " << e.what() << "\n";
    return kExitBudget;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
