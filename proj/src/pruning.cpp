#include "slth/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "slth/error.hpp"
#include "slth/parallel.hpp"

namespace slth {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double> values) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  return norm_max(subtract(a, b));
}

// Shape checks for one (U, V, K) triple; returns n.
std::size_t check_layer_shapes(const Tensor4& u, const Tensor4& v,
                               const Tensor4& k) {
  const Shape4& vs = v.shape();
  const Shape4& us = u.shape();
  const Shape4& ks = k.shape();
  if (vs.rows != 1 || vs.cols != 1) throw ShapeError("V must be 1 x 1 spatially");
  if (vs.kernels % (2 * vs.channels) != 0) {
    throw ShapeError("V needs 2 * n * c0 kernels");
  }
  if (us.channels != vs.kernels) {
    throw ShapeError("U input channels (" + std::to_string(us.channels) +
                     ") must equal V kernels (" + std::to_string(vs.kernels) + ")");
  }
  if (ks.rows != us.rows || ks.cols != us.cols || ks.channels != vs.channels ||
      ks.kernels != us.kernels) {
    throw ShapeError("target kernel shape does not match U and V");
  }
  return vs.kernels / (2 * vs.channels);
}

struct ChannelJob {
  std::size_t channel;
  int sign;
};

ChannelResult solve_channel(const Tensor4& u, const Tensor4& v_tilde,
                            const Tensor4& k_target, const ChannelJob& job,
                            std::size_t n, double tolerance, std::size_t k_budget,
                            const PruneParams& params, std::size_t layer) {
  const std::size_t d_rows = u.rows();
  const std::size_t d_cols = u.cols();
  const std::size_t c1 = u.kernels();
  const std::size_t dim = d_rows * d_cols * c1;
  const std::size_t block_start = job.channel * 2 * n + (job.sign > 0 ? 0 : n);

  std::vector<std::size_t> pool;
  std::vector<double> weights;
  for (std::size_t kk = block_start; kk < block_start + n; ++kk) {
    const double w = v_tilde.at(0, 0, job.channel, kk);
    if (w != 0.0) {
      pool.push_back(kk);
      weights.push_back(job.sign > 0 ? w : -w);
    }
  }
  std::vector<double> vectors(pool.size() * dim);
  for (std::size_t p = 0; p < pool.size(); ++p) {
    std::size_t e = 0;
    for (std::size_t i = 0; i < d_rows; ++i)
      for (std::size_t j = 0; j < d_cols; ++j)
        for (std::size_t o = 0; o < c1; ++o) {
          vectors[p * dim + e++] = u.at(i, j, pool[p], o) * weights[p];
        }
  }
  std::vector<double> target(dim);
  {
    std::size_t e = 0;
    for (std::size_t i = 0; i < d_rows; ++i)
      for (std::size_t j = 0; j < d_cols; ++j)
        for (std::size_t o = 0; o < c1; ++o) {
          target[e++] = job.sign * k_target.at(i, j, job.channel, o);
        }
  }

  ChannelResult result;
  result.channel = job.channel;
  result.sign = job.sign;
  result.pool_size = pool.size();

  std::vector<std::size_t> local;
  if (params.mode == CardinalityMode::Exact && pool.size() < k_budget) {
    result.status = SolveStatus::ProvenInfeasible;
  } else {
    const VectorSet vs(vectors, pool.size(), dim);
    SolverParams sp;
    sp.epsilon = tolerance;
    sp.k = k_budget;
    sp.mode = params.mode;
    sp.strategy = params.strategy;
    sp.seed = derive_stream(params.seed, hash_label("channel"),
                            (layer << 32) | (job.channel * 2 + (job.sign > 0 ? 0 : 1)));
    sp.enumeration_budget = params.enumeration_budget;
    const SolveOutcome outcome = solve_mrss(vs, target, sp);
    result.status = outcome.status;
    if (outcome.solution) {
      local = outcome.solution->indices;
    } else if (outcome.best) {
      local = outcome.best->indices;
    }
  }
  for (std::size_t idx : local) result.selected.push_back(pool[idx]);

  // Direct re-verification against U, V and K.
  double residual = 0.0;
  std::size_t e = 0;
  for (std::size_t i = 0; i < d_rows; ++i)
    for (std::size_t j = 0; j < d_cols; ++j)
      for (std::size_t o = 0; o < c1; ++o, ++e) {
        double acc = 0.0;
        for (std::size_t kk : result.selected) {
          const double w = v_tilde.at(0, 0, job.channel, kk);
          acc += u.at(i, j, kk, o) * (job.sign > 0 ? w : -w);
        }
        residual = std::max(residual, std::abs(acc - target[e]));
      }
  result.residual = residual;
  result.success = result.status == SolveStatus::Found && residual <= tolerance;
  return result;
}

// beta = max over output channels o of sum_{i,j,t} max(|A|, |B|) where
// A = L+ - K and B = L- + K, L+- being the effective kernels of the pruned
// pair. On each input position only one of X+ and X- is nonzero.
double certified_ratio(const Tensor4& u, const Tensor4& v_hat, const Tensor4& k,
                       std::size_t n) {
  const std::size_t c0 = v_hat.channels();
  double beta = 0.0;
  for (std::size_t o = 0; o < u.kernels(); ++o) {
    double total = 0.0;
    for (std::size_t i = 0; i < u.rows(); ++i)
      for (std::size_t j = 0; j < u.cols(); ++j)
        for (std::size_t t = 0; t < c0; ++t) {
          double lp = 0.0;
          double ln = 0.0;
          for (std::size_t kk = t * 2 * n; kk < (t + 1) * 2 * n; ++kk) {
            const double w = v_hat.at(0, 0, t, kk);
            if (w > 0.0) lp += u.at(i, j, kk, o) * w;
            if (w < 0.0) ln += u.at(i, j, kk, o) * -w;
          }
          const double target = k.at(i, j, t, o);
          total += std::max(std::abs(lp - target), std::abs(ln + target));
        }
    beta = std::max(beta, total);
  }
  return beta;
}

// ---- JSON helpers ----------------------------------------------------------

double json_double(const json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

json seed_json(SeedSpec s) {
  return {{"master_seed", s.master_seed}, {"stream_id", s.stream_id}};
}

SeedSpec seed_from(const json& j) {
  return {j.at("master_seed").get<std::uint64_t>(), j.at("stream_id").get<std::uint64_t>()};
}

json shape_json(const Shape4& s) { return {s.rows, s.cols, s.channels, s.kernels}; }

Shape4 shape_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParameterError("shape must have 4 entries");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>(),
          j[3].get<std::size_t>()};
}

json tensor_json(const Tensor4& t) {
  return {{"shape", shape_json(t.shape())},
          {"data", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor4 tensor_from(const json& j) {
  return Tensor4(shape_from(j.at("shape")), j.at("data").get<std::vector<double>>());
}

json kind_json(const MaskKind& k) {
  switch (k.tag) {
    case MaskTag::ChannelBlocked:
      return {{"tag", "ChannelBlocked"}, {"n", k.block_size}};
    case MaskTag::FilterRemoval:
      return {{"tag", "FilterRemoval"}, {"kept", k.kept}};
    case MaskTag::Composite: {
      json parts = json::array();
      for (const MaskKind& p : k.parts) parts.push_back(kind_json(p));
      return {{"tag", "Composite"}, {"parts", parts}};
    }
  }
  return {};
}

MaskKind kind_from(const json& j) {
  const std::string tag = j.at("tag").get<std::string>();
  if (tag == "ChannelBlocked") return MaskKind::channel_blocked(j.at("n").get<std::size_t>());
  if (tag == "FilterRemoval") {
    MaskKind k;
    k.tag = MaskTag::FilterRemoval;
    k.kept = j.at("kept").get<std::vector<std::size_t>>();
    return k;
  }
  if (tag == "Composite") {
    MaskKind k;
    k.tag = MaskTag::Composite;
    for (const json& p : j.at("parts")) k.parts.push_back(kind_from(p));
    return k;
  }
  throw ParameterError("unknown mask kind '" + tag + "'");
}

json mask_json(const Mask4& m) {
  std::string bits;
  bits.reserve(m.bits().size());
  for (std::uint8_t b : m.bits()) bits.push_back(b ? '1' : '0');
  return {{"shape", shape_json(m.shape())}, {"kind", kind_json(m.kind())}, {"bits", bits}};
}

Mask4 mask_from(const json& j) {
  const std::string text = j.at("bits").get<std::string>();
  std::vector<std::uint8_t> bits(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '0' && text[i] != '1') throw ParameterError("mask bits must be 0/1");
    bits[i] = text[i] == '1';
  }
  return Mask4(shape_from(j.at("shape")), std::move(bits), kind_from(j.at("kind")));
}

json strategy_json(const SolverStrategy& s) {
  json j = {{"name", strategy_name(s)}};
  if (const auto* g = std::get_if<GreedySwap>(&s)) {
    j["restarts"] = g->restarts;
    j["max_iters"] = g->max_iters;
  }
  return j;
}

SolverStrategy strategy_from(const json& j) {
  SolverStrategy s = parse_strategy(j.at("name").get<std::string>());
  if (auto* g = std::get_if<GreedySwap>(&s)) {
    g->restarts = j.value("restarts", g->restarts);
    g->max_iters = j.value("max_iters", g->max_iters);
  }
  return s;
}

json params_json(const PruneParams& p) {
  json j = {{"epsilon", p.epsilon},
            {"input_bound", p.input_bound},
            {"k_budget", p.k_budget ? json(*p.k_budget) : json(nullptr)},
            {"strategy", strategy_json(p.strategy)},
            {"mode", p.mode == CardinalityMode::Exact ? "exact" : "at-most"},
            {"probe_count", p.probe_count},
            {"probe_spatial", p.probe_spatial},
            {"seed", seed_json(p.seed)},
            {"enumeration_budget", p.enumeration_budget}};
  return j;
}

PruneParams params_from(const json& j) {
  PruneParams p;
  p.epsilon = j.at("epsilon").get<double>();
  p.input_bound = j.at("input_bound").get<double>();
  if (!j.at("k_budget").is_null()) p.k_budget = j.at("k_budget").get<std::size_t>();
  p.strategy = strategy_from(j.at("strategy"));
  const std::string mode = j.at("mode").get<std::string>();
  if (mode != "exact" && mode != "at-most") throw ParameterError("unknown mode " + mode);
  p.mode = mode == "exact" ? CardinalityMode::Exact : CardinalityMode::AtMost;
  p.probe_count = j.at("probe_count").get<std::size_t>();
  p.probe_spatial = j.at("probe_spatial").get<std::size_t>();
  p.seed = seed_from(j.at("seed"));
  p.enumeration_budget = j.at("enumeration_budget").get<std::size_t>();
  return p;
}

json layer_json(const LayerReport& r) {
  json channels = json::array();
  for (const ChannelResult& c : r.channels) {
    channels.push_back({{"channel", c.channel},
                        {"sign", c.sign},
                        {"pool_size", c.pool_size},
                        {"selected", c.selected},
                        {"status", status_name(c.status)},
                        {"residual", c.residual},
                        {"success", c.success}});
  }
  return {{"layer", r.layer},
          {"n", r.n},
          {"epsilon", r.epsilon},
          {"tolerance", r.tolerance},
          {"k_budget", r.k_budget},
          {"kept_filters", r.kept_filters},
          {"total_filters", r.total_filters},
          {"channels", channels},
          {"warnings", r.warnings},
          {"certified_ratio", r.certified_ratio},
          {"probe_error", r.probe_error},
          {"probe_median", r.probe_median}};
}

SolveStatus status_from(const std::string& s) {
  if (s == "found") return SolveStatus::Found;
  if (s == "not-found") return SolveStatus::NotFound;
  if (s == "proven-infeasible") return SolveStatus::ProvenInfeasible;
  throw ParameterError("unknown solve status '" + s + "'");
}

LayerReport layer_from(const json& j) {
  LayerReport r;
  r.layer = j.at("layer").get<std::size_t>();
  r.n = j.at("n").get<std::size_t>();
  r.epsilon = j.at("epsilon").get<double>();
  r.tolerance = j.at("tolerance").get<double>();
  r.k_budget = j.at("k_budget").get<std::size_t>();
  r.kept_filters = j.at("kept_filters").get<std::size_t>();
  r.total_filters = j.at("total_filters").get<std::size_t>();
  for (const json& c : j.at("channels")) {
    ChannelResult cr;
    cr.channel = c.at("channel").get<std::size_t>();
    cr.sign = c.at("sign").get<int>();
    cr.pool_size = c.at("pool_size").get<std::size_t>();
    cr.selected = c.at("selected").get<std::vector<std::size_t>>();
    cr.status = status_from(c.at("status").get<std::string>());
    cr.residual = json_double(c.at("residual"));
    cr.success = c.at("success").get<bool>();
    r.channels.push_back(std::move(cr));
  }
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.certified_ratio = json_double(j.at("certified_ratio"));
  r.probe_error = json_double(j.at("probe_error"));
  r.probe_median = json_double(j.at("probe_median"));
  return r;
}

}  // namespace

void NetworkSpec::validate() const {
  if (depth == 0) throw ParameterError("network depth must be >= 1");
  if (spatial == 0) throw ParameterError("spatial size must be >= 1");
  if (channels.size() != depth + 1 || kernel_sizes.size() != depth ||
      overparam.size() != depth) {
    throw ParameterError("network spec needs depth+1 channel widths and depth "
                         "kernel sizes and overparameterization factors");
  }
  auto positive = [](const std::vector<std::size_t>& v) {
    return std::all_of(v.begin(), v.end(), [](std::size_t x) { return x > 0; });
  };
  if (!positive(channels) || !positive(kernel_sizes) || !positive(overparam)) {
    throw ParameterError("network spec entries must be positive");
  }
}

Shape4 NetworkSpec::random_shape(std::size_t r) const {
  const std::size_t i = r / 2;
  const std::size_t wide = 2 * overparam.at(i) * channels.at(i);
  if (r % 2 == 0) return {1, 1, channels[i], wide};
  return {kernel_sizes.at(i), kernel_sizes[i], wide, channels.at(i + 1)};
}

Shape4 NetworkSpec::target_shape(std::size_t i) const {
  return {kernel_sizes.at(i), kernel_sizes[i], channels.at(i), channels.at(i + 1)};
}

void PruneParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParameterError("epsilon must be in (0, 1)");
  if (!(input_bound > 0.0) || !std::isfinite(input_bound)) {
    throw ParameterError("input bound M must be positive");
  }
  if (k_budget && *k_budget < 1) throw ParameterError("k_budget must be >= 1");
  if (probe_spatial == 0) throw ParameterError("probe_spatial must be >= 1");
}

std::size_t default_k_budget(std::size_t n, std::size_t d, double epsilon) {
  if (n == 0 || d == 0 || !(epsilon > 0.0 && epsilon < 1.0)) {
    throw ParameterError("default_k_budget needs n, d >= 1 and epsilon in (0, 1)");
  }
  const double m = std::sqrt(static_cast<double>(n) /
                             (static_cast<double>(d) * std::log(1.0 / epsilon)));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(m)));
}

DropReluMasks drop_relu_decompose(const Tensor4& v, const Mask4& s1) {
  const Shape4& s = v.shape();
  if (s.rows != 1 || s.cols != 1 || s.kernels % (2 * s.channels) != 0) {
    throw ShapeError("drop_relu_decompose: V must be 1 x 1 x c x 2nc");
  }
  const std::size_t n = s.kernels / (2 * s.channels);
  if (!(s1.shape() == s) || s1.kind() != MaskKind::channel_blocked(2 * n) ||
      !validate_structure(s1).valid) {
    throw ParameterError("drop_relu_decompose: S1 is not a valid ChannelBlocked(" +
                         std::to_string(2 * n) + ") mask for V");
  }
  Mask4 s2 = sign_split_mask(apply_mask(v, s1), n);
  Mask4 combined = compose(s1, s2);
  return {std::move(s2), std::move(combined)};
}

bool LayerReport::all_success() const {
  return std::all_of(channels.begin(), channels.end(),
                     [](const ChannelResult& c) { return c.success; });
}

PrunedLayer prune_single_layer(const Tensor4& u, const Tensor4& v,
                               const Tensor4& k_target, const PruneParams& params,
                               std::size_t layer) {
  params.validate();
  const std::size_t n = check_layer_shapes(u, v, k_target);
  if (norm_l1(k_target) > 1.0 + 1e-12) {
    throw ParameterError("target kernel must satisfy ||K||_1 <= 1");
  }
  const std::size_t c0 = v.channels();
  const std::size_t c1 = u.kernels();
  const std::size_t d = u.rows();

  LayerReport report;
  report.layer = layer;
  report.n = n;
  report.epsilon = params.epsilon;
  report.tolerance =
      params.epsilon / (2.0 * static_cast<double>(u.rows() * u.cols() * c1 * c0));
  report.k_budget = params.k_budget.value_or(default_k_budget(n, d, params.epsilon));
  report.total_filters = v.kernels();

  const Mask4 s1 = channel_blocked_mask(1, c0, 2 * n);
  const DropReluMasks drop = drop_relu_decompose(v, s1);
  const Tensor4 v_tilde = apply_mask(v, drop.combined);

  std::vector<ChannelJob> jobs;
  for (std::size_t t = 0; t < c0; ++t) {
    jobs.push_back({t, +1});
    jobs.push_back({t, -1});
  }
  report.channels.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    report.channels[j] = solve_channel(u, v_tilde, k_target, jobs[j], n,
                                       report.tolerance, report.k_budget, params, layer);
  });

  std::vector<std::size_t> kept;
  for (const ChannelResult& c : report.channels) {
    kept.insert(kept.end(), c.selected.begin(), c.selected.end());
    if (3 * c.pool_size <= n) {
      report.warnings.push_back(
          "layer " + std::to_string(layer) + " channel " + std::to_string(c.channel) +
          " sign " + (c.sign > 0 ? "+" : "-") + ": " + std::to_string(c.pool_size) +
          " of " + std::to_string(n) + " kernels in the sign block, at most n/3");
    }
  }
  const Mask4 s3 = filter_removal_mask(v.shape(), kept);
  PrunedLayer out;
  out.mask = compose(s1, compose(drop.s2, s3));
  out.v = apply_mask(v, out.mask);
  out.u = u;
  report.kept_filters = 0;
  for (std::size_t l = 0; l < v.kernels(); ++l) {
    if (out.mask.kernel_active(l)) ++report.kept_filters;
  }
  report.certified_ratio = certified_ratio(u, out.v, k_target, n);

  report.probe_error = kNaN;
  report.probe_median = kNaN;
  if (params.probe_count > 0) {
    const auto probes =
        probe_inputs(params.probe_spatial, c0, params.input_bound, params.probe_count,
                     derive_stream(params.seed, hash_label("layer-probes"), layer));
    std::vector<double> errors(probes.size());
    parallel_for(probes.size(), [&](std::size_t p) {
      const FeatureMap target = conv(k_target, probes[p]);
      const FeatureMap pruned = conv(out.u, relu(conv(out.v, probes[p])));
      errors[p] = max_abs_diff(target, pruned);
    });
    report.probe_error = *std::max_element(errors.begin(), errors.end());
    report.probe_median = median_of(errors);
  }
  out.report = std::move(report);
  return out;
}

std::vector<Tensor4> sample_random_network(const NetworkSpec& spec, SeedSpec seed) {
  spec.validate();
  std::vector<Tensor4> out;
  for (std::size_t r = 0; r < 2 * spec.depth; ++r) {
    out.push_back(sample_normal_tensor(spec.random_shape(r),
                                       derive_stream(seed, hash_label("random-layer"), r)));
  }
  return out;
}

Tensor4 sample_unit_l1_tensor(Shape4 shape, SeedSpec seed) {
  Tensor4 t = sample_normal_tensor(shape, seed);
  const double norm = norm_l1(t);
  return norm > 0.0 ? scale(t, 1.0 / norm) : t;
}

LayerInstance sample_layer_instance(std::size_t d, std::size_t c0, std::size_t c1,
                                    std::size_t n, SeedSpec seed) {
  if (d == 0 || c0 == 0 || c1 == 0 || n == 0) throw ParameterError("layer sizes must be >= 1");
  LayerInstance out{
      sample_normal_tensor({1, 1, c0, 2 * n * c0}, derive_stream(seed, hash_label("V"), 0)),
      sample_normal_tensor({d, d, 2 * n * c0, c1}, derive_stream(seed, hash_label("U"), 0)),
      sample_unit_l1_tensor({d, d, c0, c1}, derive_stream(seed, hash_label("K"), 0))};
  return out;
}

std::vector<Tensor4> sample_target_network(const NetworkSpec& spec, SeedSpec seed) {
  spec.validate();
  std::vector<Tensor4> out;
  for (std::size_t i = 0; i < spec.depth; ++i) {
    out.push_back(sample_unit_l1_tensor(spec.target_shape(i),
                                        derive_stream(seed, hash_label("target-layer"), i)));
  }
  return out;
}

PruneParams layer_params(const NetworkSpec& spec, const PruneParams& params,
                         std::size_t layer) {
  PruneParams p = params;
  p.epsilon = params.epsilon / (2.0 * static_cast<double>(spec.depth));
  p.k_budget = params.k_budget.value_or(
      default_k_budget(spec.overparam.at(layer), spec.kernel_sizes.at(layer), params.epsilon));
  p.probe_count = 0;
  p.seed = derive_stream(params.seed, hash_label("layer"), layer);
  return p;
}

PrunedNetwork prune_network(const NetworkSpec& spec,
                            const std::vector<Tensor4>& random_kernels,
                            const std::vector<Tensor4>& targets,
                            const PruneParams& params) {
  spec.validate();
  params.validate();
  if (random_kernels.size() != 2 * spec.depth || targets.size() != spec.depth) {
    throw ShapeError("prune_network needs 2 * depth random kernels and depth targets");
  }
  for (std::size_t r = 0; r < random_kernels.size(); ++r) {
    if (!(random_kernels[r].shape() == spec.random_shape(r))) {
      throw ShapeError("random layer " + std::to_string(r) + " has the wrong shape");
    }
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i].shape() == spec.target_shape(i))) {
      throw ShapeError("target layer " + std::to_string(i) + " has the wrong shape");
    }
  }

  PrunedNetwork net;
  double product = 1.0;
  for (std::size_t i = 0; i < spec.depth; ++i) {
    PrunedLayer pl = prune_single_layer(random_kernels[2 * i + 1], random_kernels[2 * i],
                                        targets[i], layer_params(spec, params, i), i);
    for (const ChannelResult& c : pl.report.channels) {
      if (!c.success) net.report.failures.push_back({i, c.channel, c.sign});
    }
    product *= 1.0 + pl.report.certified_ratio;
    net.masks.push_back(std::move(pl.mask));
    net.kernels.push_back(std::move(pl.v));
    net.kernels.push_back(std::move(pl.u));
    net.report.layers.push_back(std::move(pl.report));
  }

  const double m = params.input_bound;
  const double l = static_cast<double>(spec.depth);
  net.report.composed_bound = m * (std::pow(1.0 + params.epsilon / (2.0 * l), l) - 1.0);
  net.report.certified_bound = m * (product - 1.0);

  const auto probes = probe_inputs(spec.spatial, spec.channels[0], m, params.probe_count,
                                   derive_stream(params.seed, hash_label("network-probes"), 0));
  std::vector<double> errors(probes.size());
  parallel_for(probes.size(), [&](std::size_t p) {
    errors[p] = max_abs_diff(evaluate_network(targets, {}, probes[p]),
                             evaluate_network(net.kernels, {}, probes[p]));
  });
  net.report.probes = probes.size();
  net.report.empirical_error = *std::max_element(errors.begin(), errors.end());
  net.report.median_error = median_of(errors);
  return net;
}

FeatureMap evaluate_network(const std::vector<Tensor4>& kernels,
                            const std::vector<std::optional<Mask4>>& masks,
                            const FeatureMap& input) {
  if (kernels.empty()) throw ShapeError("evaluate_network: no kernels");
  if (!masks.empty() && masks.size() != kernels.size()) {
    throw ShapeError("evaluate_network: need one mask slot per kernel");
  }
  FeatureMap x = input;
  for (std::size_t r = 0; r < kernels.size(); ++r) {
    if (kernels[r].channels() != x.channels()) {
      throw ShapeError("evaluate_network: layer " + std::to_string(r) + " expects " +
                       std::to_string(kernels[r].channels()) + " channels, got " +
                       std::to_string(x.channels()));
    }
    const bool masked = !masks.empty() && masks[r].has_value();
    x = masked ? conv(apply_mask(kernels[r], *masks[r]), x) : conv(kernels[r], x);
    if (r + 1 < kernels.size()) x = relu(x);
  }
  return x;
}

std::vector<FeatureMap> probe_inputs(std::size_t spatial, std::size_t channels,
                                     double bound, std::size_t count, SeedSpec seed) {
  std::vector<FeatureMap> out;
  out.reserve(count + 2);
  for (std::size_t p = 0; p < count; ++p) {
    out.push_back(sample_uniform_feature_map(spatial, spatial, channels, -bound, bound,
                                             derive_stream(seed, hash_label("probe"), p)));
  }
  for (double corner : {bound, -bound}) {
    FeatureMap x(spatial, spatial, channels);
    for (double& v : x.values()) v = corner;
    out.push_back(std::move(x));
  }
  return out;
}

std::string layer_report_to_json(const LayerReport& report) {
  return layer_json(report).dump(2);
}

std::string bundle_to_json(const PruneBundle& b) {
  json spec = {{"depth", b.spec.depth},
               {"spatial", b.spec.spatial},
               {"channels", b.spec.channels},
               {"kernel_sizes", b.spec.kernel_sizes},
               {"overparam", b.spec.overparam}};
  json random = json::array();
  for (const Tensor4& t : b.random_kernels) random.push_back(tensor_json(t));
  json targets = json::array();
  for (const Tensor4& t : b.targets) targets.push_back(tensor_json(t));
  json masks = json::array();
  for (const Mask4& m : b.masks) masks.push_back(mask_json(m));
  json layers = json::array();
  for (const LayerReport& r : b.report.layers) layers.push_back(layer_json(r));
  json failures = json::array();
  for (const PruneFailure& f : b.report.failures) {
    failures.push_back({{"layer", f.layer}, {"channel", f.channel}, {"sign", f.sign}});
  }
  json report = {{"layers", layers},
                 {"failures", failures},
                 {"probes", b.report.probes},
                 {"empirical_error", b.report.empirical_error},
                 {"median_error", b.report.median_error},
                 {"composed_bound", b.report.composed_bound},
                 {"certified_bound", b.report.certified_bound}};
  json root = {{"format", "slth-prune-bundle"},
               {"version", 1},
               {"spec", spec},
               {"params", params_json(b.params)},
               {"network_seed", seed_json(b.network_seed)},
               {"target_seed", seed_json(b.target_seed)},
               {"random_kernels", random},
               {"targets", targets},
               {"masks", masks},
               {"report", report}};
  return root.dump(1);
}

PruneBundle bundle_from_json(const std::string& text) {
  try {
    const json root = json::parse(text);
    if (root.at("format").get<std::string>() != "slth-prune-bundle") {
      throw ParameterError("not a pruning bundle");
    }
    if (root.at("version").get<int>() != 1) throw ParameterError("unsupported bundle version");
    PruneBundle b;
    const json& spec = root.at("spec");
    b.spec.depth = spec.at("depth").get<std::size_t>();
    b.spec.spatial = spec.at("spatial").get<std::size_t>();
    b.spec.channels = spec.at("channels").get<std::vector<std::size_t>>();
    b.spec.kernel_sizes = spec.at("kernel_sizes").get<std::vector<std::size_t>>();
    b.spec.overparam = spec.at("overparam").get<std::vector<std::size_t>>();
    b.spec.validate();
    b.params = params_from(root.at("params"));
    b.network_seed = seed_from(root.at("network_seed"));
    b.target_seed = seed_from(root.at("target_seed"));
    for (const json& t : root.at("random_kernels")) b.random_kernels.push_back(tensor_from(t));
    for (const json& t : root.at("targets")) b.targets.push_back(tensor_from(t));
    for (const json& m : root.at("masks")) b.masks.push_back(mask_from(m));
    const json& report = root.at("report");
    for (const json& l : report.at("layers")) b.report.layers.push_back(layer_from(l));
    for (const json& f : report.at("failures")) {
      b.report.failures.push_back({f.at("layer").get<std::size_t>(),
                                   f.at("channel").get<std::size_t>(), f.at("sign").get<int>()});
    }
    b.report.probes = report.at("probes").get<std::size_t>();
    b.report.empirical_error = json_double(report.at("empirical_error"));
    b.report.median_error = json_double(report.at("median_error"));
    b.report.composed_bound = json_double(report.at("composed_bound"));
    b.report.certified_bound = json_double(report.at("certified_bound"));
    return b;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed pruning bundle: ") + e.what());
  }
}

void write_bundle(const PruneBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << bundle_to_json(bundle) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

PruneBundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return bundle_from_json(ss.str());
}

double recompute_empirical_error(const PruneBundle& b) {
  if (b.masks.size() != b.spec.depth || b.random_kernels.size() != 2 * b.spec.depth) {
    throw ShapeError("bundle does not match its network spec");
  }
  std::vector<Tensor4> kernels;
  for (std::size_t i = 0; i < b.spec.depth; ++i) {
    kernels.push_back(apply_mask(b.random_kernels[2 * i], b.masks[i]));
    kernels.push_back(b.random_kernels[2 * i + 1]);
  }
  const auto probes =
      probe_inputs(b.spec.spatial, b.spec.channels[0], b.params.input_bound,
                   b.params.probe_count,
                   derive_stream(b.params.seed, hash_label("network-probes"), 0));
  double worst = 0.0;
  for (const FeatureMap& x : probes) {
    worst = std::max(worst, max_abs_diff(evaluate_network(b.targets, {}, x),
                                         evaluate_network(kernels, {}, x)));
  }
  return worst;
}

}  // namespace slth
