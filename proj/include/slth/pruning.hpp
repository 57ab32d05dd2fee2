#pragma once

// Structured pruning of a random CNN towards a smaller target CNN.
//
// Each target layer K (d x d x c0 x c1) is approximated by a pair of random
// layers: V (1 x 1 x c0 x 2n c0) followed by ReLU and U (d x d x 2n c0 x c1).
// Only V is masked; dropping a kernel of V removes the matching input channel
// of U, so U is carried unchanged.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slth/masks.hpp"
#include "slth/random.hpp"
#include "slth/subset_sum.hpp"
#include "slth/tensor.hpp"

namespace slth {

struct NetworkSpec {
  std::size_t depth = 1;                  // number of target layers
  std::size_t spatial = 4;                // D, probe inputs are D x D x c0
  std::vector<std::size_t> channels;      // c0 .. c_depth
  std::vector<std::size_t> kernel_sizes;  // d1 .. d_depth
  std::vector<std::size_t> overparam;     // n1 .. n_depth

  /// Throws ParameterError on inconsistent lengths or zero entries.
  void validate() const;
  /// Shape of random layer r in [0, 2 * depth).
  Shape4 random_shape(std::size_t r) const;
  /// Shape of target layer i in [0, depth).
  Shape4 target_shape(std::size_t i) const;
};

struct PruneParams {
  double epsilon = 0.25;
  double input_bound = 1.0;  // M, probes satisfy ||X||_max <= M
  /// Subset cardinality cap per channel; default_k_budget when unset.
  std::optional<std::size_t> k_budget;
  SolverStrategy strategy = GreedySwap{};
  CardinalityMode mode = CardinalityMode::AtMost;
  std::size_t probe_count = 256;
  /// Spatial size of single-layer probe inputs.
  std::size_t probe_spatial = 4;
  SeedSpec seed{};
  std::size_t enumeration_budget = kDefaultEnumerationBudget;

  /// Throws ParameterError unless 0 < epsilon < 1, M > 0, k_budget >= 1.
  void validate() const;
};

/// ceil(sqrt(n / (d * log(1 / epsilon)))), at least 1.
std::size_t default_k_budget(std::size_t n, std::size_t d, double epsilon);

struct DropReluMasks {
  Mask4 s2;        // sign split, FilterRemoval
  Mask4 combined;  // S1 and S2
};

/// Throws ParameterError unless s1 is a valid ChannelBlocked(2n) mask for V.
DropReluMasks drop_relu_decompose(const Tensor4& v, const Mask4& s1);

struct ChannelResult {
  std::size_t channel = 0;  // input channel t0
  int sign = +1;            // +1 approximates K, -1 approximates -K
  std::size_t pool_size = 0;
  /// Kernels of V used for this channel; the best-effort subset on failure.
  std::vector<std::size_t> selected;
  SolveStatus status = SolveStatus::NotFound;
  /// max |sum_selected - target| recomputed from U and V.
  double residual = 0.0;
  bool success = false;
};

struct LayerReport {
  std::size_t layer = 0;
  std::size_t n = 0;
  double epsilon = 0.0;    // layer tolerance
  double tolerance = 0.0;  // per-entry epsilon / (2 d^2 c1 c0)
  std::size_t k_budget = 0;
  std::size_t kept_filters = 0;
  std::size_t total_filters = 0;
  std::vector<ChannelResult> channels;  // ordered by (channel, sign +, sign -)
  std::vector<std::string> warnings;
  /// beta with sup_X ||U*relu(V*X) - K*X||_max <= beta * ||X||_max, computed
  /// from the kept kernels whether or not every channel succeeded.
  double certified_ratio = 0.0;
  /// Max error over probes (single-layer runs only, else NaN).
  double probe_error = 0.0;
  /// Median error over probes (single-layer runs only, else NaN).
  double probe_median = 0.0;

  bool all_success() const;
};

struct PrunedLayer {
  Mask4 mask;   // final odd-layer mask
  Tensor4 v;    // V with the mask applied
  Tensor4 u;    // U, unchanged
  LayerReport report;
};

/// Prunes V so that U * relu(V_hat * X) approximates K * X within
/// params.epsilon * ||X||_max on success. `layer` only tags the report and
/// seeds; probes are drawn when params.probe_count > 0.
PrunedLayer prune_single_layer(const Tensor4& u, const Tensor4& v,
                               const Tensor4& k_target, const PruneParams& params,
                               std::size_t layer = 0);

struct PruneFailure {
  std::size_t layer = 0;
  std::size_t channel = 0;
  int sign = +1;
};

struct PruneReport {
  std::vector<LayerReport> layers;
  std::vector<PruneFailure> failures;
  std::size_t probes = 0;        // uniform probes plus the two corners
  double empirical_error = 0.0;  // max over probes
  double median_error = 0.0;
  /// M * ((1 + eps / 2l)^l - 1)
  double composed_bound = 0.0;
  /// M * (prod_i (1 + beta_i) - 1), valid for any outcome.
  double certified_bound = 0.0;

  bool all_success() const { return failures.empty(); }
};

struct PrunedNetwork {
  std::vector<Mask4> masks;       // one per target layer, for the odd layers
  std::vector<Tensor4> kernels;   // 2 * depth pruned kernels
  PruneReport report;
};

/// Random layers L1..L_{2 depth} with standard normal entries.
std::vector<Tensor4> sample_random_network(const NetworkSpec& spec, SeedSpec seed);

/// Target kernels with standard normal directions scaled to unit L1 norm.
std::vector<Tensor4> sample_target_network(const NetworkSpec& spec, SeedSpec seed);

/// Tensor with standard normal direction and ||T||_1 = 1.
Tensor4 sample_unit_l1_tensor(Shape4 shape, SeedSpec seed);

/// One random layer pair plus a unit-L1 target, for single-layer runs.
struct LayerInstance {
  Tensor4 v;  // 1 x 1 x c0 x 2n c0
  Tensor4 u;  // d x d x 2n c0 x c1
  Tensor4 k;  // d x d x c0 x c1
};

LayerInstance sample_layer_instance(std::size_t d, std::size_t c0, std::size_t c1,
                                    std::size_t n, SeedSpec seed);

/// Parameters prune_network hands to prune_single_layer for target layer i:
/// tolerance epsilon / (2 depth), a per-layer seed, an explicit k_budget from
/// the overall epsilon, and no single-layer probes.
PruneParams layer_params(const NetworkSpec& spec, const PruneParams& params,
                         std::size_t layer);

/// Prunes every odd layer with tolerance params.epsilon / (2 depth) and
/// measures the end-to-end error on probes X in [-M, M]^{D x D x c0}.
/// Channel failures are listed in the report, never hidden.
PrunedNetwork prune_network(const NetworkSpec& spec,
                            const std::vector<Tensor4>& random_kernels,
                            const std::vector<Tensor4>& targets,
                            const PruneParams& params);

/// conv / relu alternation with a linear final layer. When masks is
/// non-empty it must have one entry per kernel (std::nullopt = unmasked).
FeatureMap evaluate_network(const std::vector<Tensor4>& kernels,
                            const std::vector<std::optional<Mask4>>& masks,
                            const FeatureMap& input);

/// Probe inputs: `count` uniform draws on [-bound, bound] followed by the
/// all-(+bound) and all-(-bound) tensors.
std::vector<FeatureMap> probe_inputs(std::size_t spatial, std::size_t channels,
                                     double bound, std::size_t count,
                                     SeedSpec seed);

/// Everything needed to recompute a pruning run.
struct PruneBundle {
  NetworkSpec spec;
  PruneParams params;
  SeedSpec network_seed{};
  SeedSpec target_seed{};
  std::vector<Tensor4> random_kernels;
  std::vector<Tensor4> targets;
  std::vector<Mask4> masks;
  PruneReport report;
};

std::string layer_report_to_json(const LayerReport& report);
std::string bundle_to_json(const PruneBundle& bundle);
/// Throws ParameterError on malformed input.
PruneBundle bundle_from_json(const std::string& text);
void write_bundle(const PruneBundle& bundle, const std::filesystem::path& path);
PruneBundle read_bundle(const std::filesystem::path& path);

/// Re-evaluates a bundle's pruned network against its targets on the stored
/// probe plan and returns the max error.
double recompute_empirical_error(const PruneBundle& bundle);

}  // namespace slth
