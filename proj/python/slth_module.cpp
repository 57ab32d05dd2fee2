#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "slth/error.hpp"
#include "slth/harness.hpp"
#include "slth/masks.hpp"
#include "slth/pruning.hpp"
#include "slth/random.hpp"
#include "slth/subset_sum.hpp"
#include "slth/tensor.hpp"

namespace py = pybind11;
using namespace slth;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor4 to_tensor(const Array& a) {
  if (a.ndim() != 4) throw ShapeError("expected a 4-d array (rows, cols, channels, kernels)");
  const Shape4 s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                 static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
  return Tensor4(s, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_tensor(const Tensor4& t) {
  py::array_t<double> out({t.rows(), t.cols(), t.channels(), t.kernels()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

FeatureMap to_map(const Array& a) {
  if (a.ndim() != 3) throw ShapeError("expected a 3-d array (height, width, channels)");
  return FeatureMap(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                    static_cast<std::size_t>(a.shape(2)),
                    std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_map(const FeatureMap& m) {
  py::array_t<double> out({m.height(), m.width(), m.channels()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::object json_loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

py::object solution_dict(const std::optional<SubsetSolution>& s) {
  if (!s) return py::none();
  py::dict d;
  d["indices"] = s->indices;
  d["achieved"] = s->achieved;
  d["residual"] = s->residual_inf;
  return d;
}

py::dict outcome_dict(const SolveOutcome& o) {
  py::dict d;
  d["status"] = status_name(o.status);
  d["found"] = o.found();
  d["solution"] = solution_dict(o.solution);
  d["best"] = solution_dict(o.best);
  return d;
}

CardinalityMode parse_mode(const std::string& m) {
  if (m == "exact") return CardinalityMode::Exact;
  if (m == "at-most") return CardinalityMode::AtMost;
  throw ParameterError("mode must be exact or at-most");
}

py::dict check_dict(const BoundCheckResult& c) {
  py::dict d;
  d["name"] = c.name;
  d["estimate"] = c.estimate;
  d["std_error"] = c.std_error;
  d["bound"] = c.bound;
  d["direction"] = direction_name(c.direction);
  d["trials"] = c.trials;
  d["pass"] = c.pass;
  return d;
}

PruneParams prune_params(double epsilon, double input_bound, std::size_t k_budget,
                         const std::string& strategy, const std::string& mode,
                         std::size_t probes, std::uint64_t seed, std::uint64_t stream) {
  PruneParams p;
  p.epsilon = epsilon;
  p.input_bound = input_bound;
  if (k_budget) p.k_budget = k_budget;
  p.strategy = parse_strategy(strategy);
  p.mode = parse_mode(mode);
  p.probe_count = probes;
  p.seed = {seed, stream};
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(slth, m) {
  m.doc() = "Strong lottery ticket pruning for convolutional networks";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ParameterError>(m, "ParameterError", base);
  py::register_exception<BudgetError>(m, "BudgetError", base);
  py::register_exception<CapacityError>(m, "CapacityError", base);

  // tensors
  m.def("conv", [](const Array& k, const Array& x) { return from_map(conv(to_tensor(k), to_map(x))); },
        py::arg("kernel"), py::arg("x"),
        "out[r, s, l] = sum K[i, j, t, l] X[r - i, s - j, t] over in-range indices");
  m.def("relu", [](const Array& x) { return from_map(relu(to_map(x))); });
  m.def("sample_normal_tensor",
        [](std::vector<std::size_t> shape, std::uint64_t seed, std::uint64_t stream) {
          if (shape.size() != 4) throw ShapeError("shape must have 4 entries");
          return from_tensor(sample_normal_tensor({shape[0], shape[1], shape[2], shape[3]},
                                                  {seed, stream}));
        },
        py::arg("shape"), py::arg("seed") = 0, py::arg("stream") = 0);
  m.def("sample_nsn",
        [](std::size_t n, std::size_t d, std::uint64_t seed, std::uint64_t stream) {
          const NsnEnsemble e = sample_nsn(n, d, {seed, stream});
          py::array_t<double> v({n, d});
          std::copy(e.vectors.begin(), e.vectors.end(), v.mutable_data());
          return py::make_tuple(v, e.scalars);
        },
        py::arg("n"), py::arg("d"), py::arg("seed") = 0, py::arg("stream") = 0,
        "Returns (vectors n x d, scalars).");

  // subset sum
  m.def("solve_rssp_1d",
        [](const Array& xs, double z, double epsilon, const std::string& strategy) {
          const std::vector<double> v = flat(xs);
          return outcome_dict(solve_rssp_1d(v, z, epsilon, parse_strategy(strategy)));
        },
        py::arg("xs"), py::arg("z"), py::arg("epsilon"), py::arg("strategy") = "mitm");
  m.def("solve_mrss",
        [](const Array& vectors, const Array& z, std::size_t k, double epsilon,
           const std::string& strategy, const std::string& mode, std::uint64_t seed,
           std::size_t budget) {
          if (vectors.ndim() != 2) throw ShapeError("vectors must be n x d");
          const std::vector<double> v = flat(vectors);
          const std::vector<double> t = flat(z);
          SolverParams p;
          p.k = k;
          p.epsilon = epsilon;
          p.strategy = parse_strategy(strategy);
          p.mode = parse_mode(mode);
          p.seed = {seed, 0};
          p.enumeration_budget = budget;
          const VectorSet vs(v, static_cast<std::size_t>(vectors.shape(0)),
                             static_cast<std::size_t>(vectors.shape(1)));
          return outcome_dict(solve_mrss(vs, t, p));
        },
        py::arg("vectors"), py::arg("z"), py::arg("k"), py::arg("epsilon"),
        py::arg("strategy") = "enum", py::arg("mode") = "exact", py::arg("seed") = 0,
        py::arg("budget") = kDefaultEnumerationBudget);
  m.def("subset_sum_number",
        [](const Array& vectors, const Array& z, std::size_t k, double epsilon) {
          if (vectors.ndim() != 2) throw ShapeError("vectors must be n x d");
          const std::vector<double> v = flat(vectors);
          const std::vector<double> t = flat(z);
          const VectorSet vs(v, static_cast<std::size_t>(vectors.shape(0)),
                             static_cast<std::size_t>(vectors.shape(1)));
          return subset_sum_number(vs, t, k, epsilon);
        },
        py::arg("vectors"), py::arg("z"), py::arg("k"), py::arg("epsilon"));

  // masks
  py::class_<Mask4>(m, "Mask")
      .def_property_readonly("kind", [](const Mask4& x) { return x.kind().describe(); })
      .def_property_readonly("shape",
                             [](const Mask4& x) {
                               const Shape4& s = x.shape();
                               return py::make_tuple(s.rows, s.cols, s.channels, s.kernels);
                             })
      .def("bits",
           [](const Mask4& x) {
             const Shape4& s = x.shape();
             py::array_t<std::uint8_t> out({s.rows, s.cols, s.channels, s.kernels});
             std::copy(x.bits().begin(), x.bits().end(), out.mutable_data());
             return out;
           })
      .def("ones", &Mask4::ones)
      .def("is_valid", [](const Mask4& x) { return validate_structure(x).valid; })
      .def("violations", [](const Mask4& x) { return validate_structure(x).summary(); })
      .def("is_blocked_filter_composite",
           [](const Mask4& x, std::size_t n) { return is_blocked_filter_composite(x.kind(), n); })
      .def("to_bytes",
           [](const Mask4& x) {
             const std::vector<std::uint8_t> b = serialize_mask(x);
             return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
           })
      .def_static("from_bytes",
                  [](const py::bytes& b) {
                    const std::string s = b;
                    return deserialize_mask(std::vector<std::uint8_t>(s.begin(), s.end()));
                  })
      .def("__eq__", [](const Mask4& a, const Mask4& b) { return a == b; })
      .def("__repr__", [](const Mask4& x) { return "<Mask " + x.kind().describe() + ">"; });

  m.def("channel_blocked_mask", &channel_blocked_mask, py::arg("d"), py::arg("c"), py::arg("n"));
  m.def("filter_removal_mask",
        [](std::vector<std::size_t> shape, std::vector<std::size_t> kept) {
          if (shape.size() != 4) throw ShapeError("shape must have 4 entries");
          return filter_removal_mask({shape[0], shape[1], shape[2], shape[3]}, std::move(kept));
        });
  m.def("compose", &compose);
  m.def("apply_mask", [](const Array& t, const Mask4& mask) {
    return from_tensor(apply_mask(to_tensor(t), mask));
  });

  // pruning
  m.def("default_k_budget", &default_k_budget, py::arg("n"), py::arg("d"), py::arg("epsilon"));
  m.def("sample_layer_instance",
        [](std::size_t d, std::size_t c0, std::size_t c1, std::size_t n, std::uint64_t seed,
           std::uint64_t stream) {
          const LayerInstance inst = sample_layer_instance(d, c0, c1, n, {seed, stream});
          return py::make_tuple(from_tensor(inst.u), from_tensor(inst.v), from_tensor(inst.k));
        },
        py::arg("d"), py::arg("c0"), py::arg("c1"), py::arg("n"), py::arg("seed") = 0,
        py::arg("stream") = 0, "Returns (U, V, K).");
  m.def("prune_single_layer",
        [](const Array& u, const Array& v, const Array& k, double epsilon, double input_bound,
           std::size_t k_budget, const std::string& strategy, const std::string& mode,
           std::size_t probes, std::uint64_t seed, std::uint64_t stream) {
          const PruneParams p =
              prune_params(epsilon, input_bound, k_budget, strategy, mode, probes, seed, stream);
          const PrunedLayer out = prune_single_layer(to_tensor(u), to_tensor(v), to_tensor(k), p);
          py::dict d;
          d["mask"] = out.mask;
          d["v"] = from_tensor(out.v);
          d["report"] = json_loads(layer_report_to_json(out.report));
          return d;
        },
        py::arg("u"), py::arg("v"), py::arg("k"), py::arg("epsilon") = 0.25,
        py::arg("input_bound") = 1.0, py::arg("k_budget") = 0, py::arg("strategy") = "greedy",
        py::arg("mode") = "at-most", py::arg("probes") = 256, py::arg("seed") = 0,
        py::arg("stream") = 0, "k_budget = 0 selects the default budget.");
  m.def("prune_network",
        [](std::size_t spatial, std::vector<std::size_t> channels,
           std::vector<std::size_t> kernel_sizes, std::vector<std::size_t> overparam,
           double epsilon, double input_bound, std::size_t k_budget, const std::string& strategy,
           const std::string& mode, std::size_t probes, std::uint64_t seed) {
          NetworkSpec spec;
          spec.depth = kernel_sizes.size();
          spec.spatial = spatial;
          spec.channels = std::move(channels);
          spec.kernel_sizes = std::move(kernel_sizes);
          spec.overparam = std::move(overparam);
          spec.validate();
          PruneBundle b;
          b.spec = spec;
          b.params = prune_params(epsilon, input_bound, k_budget, strategy, mode, probes, seed, 0);
          b.network_seed = derive_stream({seed, 0}, hash_label("network"), 0);
          b.target_seed = derive_stream({seed, 0}, hash_label("targets"), 0);
          b.random_kernels = sample_random_network(spec, b.network_seed);
          b.targets = sample_target_network(spec, b.target_seed);
          PrunedNetwork net = prune_network(spec, b.random_kernels, b.targets, b.params);
          b.masks = std::move(net.masks);
          b.report = std::move(net.report);
          py::dict d;
          d["masks"] = b.masks;
          d["bundle"] = json_loads(bundle_to_json(b));
          return d;
        },
        py::arg("spatial"), py::arg("channels"), py::arg("kernel_sizes"), py::arg("overparam"),
        py::arg("epsilon") = 0.5, py::arg("input_bound") = 1.0, py::arg("k_budget") = 0,
        py::arg("strategy") = "greedy", py::arg("mode") = "at-most", py::arg("probes") = 256,
        py::arg("seed") = 1);
  m.def("recompute_empirical_error",
        [](const std::string& bundle_json) {
          return recompute_empirical_error(bundle_from_json(bundle_json));
        },
        "Recomputes the end-to-end probe error of a bundle given as JSON text.");

  // harness
  m.def("nsn_hit_bound", &nsn_hit_bound);
  m.def("joint_hit_bound", &joint_hit_bound);
  m.def("intersection_tail_bound", &intersection_tail_bound);
  m.def("run_lemma_checks",
        [](std::uint64_t seed, std::size_t tail_trials, std::size_t hit_trials,
           std::size_t moment_trials) {
          LemmaCheckPlan plan;
          plan.seed = {seed, 0};
          plan.tail_trials = tail_trials;
          plan.hit_trials = hit_trials;
          plan.moment_trials = moment_trials;
          py::list out;
          for (const BoundCheckResult& c : run_lemma_checks(plan)) out.append(check_dict(c));
          return out;
        },
        py::arg("seed") = 1, py::arg("tail_trials") = 1'000'000, py::arg("hit_trials") = 100'000,
        py::arg("moment_trials") = 20'000);
  m.def("scan_rssp_phase",
        [](double epsilon, std::vector<std::size_t> n_list, std::size_t grid_size,
           std::size_t trials, std::uint64_t seed) {
          RsspScanPlan plan;
          plan.epsilon = epsilon;
          plan.n_list = std::move(n_list);
          plan.grid_size = grid_size;
          plan.trials = trials;
          plan.seed = {seed, 0};
          return rssp_phase_csv(plan, scan_rssp_phase(plan));
        },
        py::arg("epsilon") = 0.05, py::arg("n_list") = std::vector<std::size_t>{10, 20, 30, 40, 50, 60},
        py::arg("grid_size") = 41, py::arg("trials") = 200, py::arg("seed") = 1,
        "Returns the scan as CSV text.");
}
