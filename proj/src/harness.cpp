#include "slth/harness.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "slth/error.hpp"
#include "slth/parallel.hpp"

namespace slth {
namespace {

constexpr std::size_t kChunk = 4096;

// Runs `trial(stream, acc)` for every trial, one accumulator per fixed chunk,
// and merges the chunks in order.
template <typename Acc, typename Trial>
Acc accumulate_trials(std::size_t trials, SeedSpec seed, const std::string& label,
                      Trial&& trial) {
  const std::uint64_t tag = hash_label(label);
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<Acc> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(trials, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      RandomStream rng(derive_stream(seed, tag, i));
      trial(rng, partial[c]);
    }
  });
  Acc total;
  for (const Acc& p : partial) total.merge(p);
  return total;
}

struct Counter {
  std::size_t hits = 0;
  void merge(const Counter& o) { hits += o.hits; }
};

// One-sided Wilson (z = 3) half-width over 3, on the side facing the bound.
// Close to sqrt(p (1 - p) / N) for moderate counts and positive at zero hits.
BoundCheckResult frequency_check(std::string name, std::size_t hits, std::size_t trials,
                                 double bound, BoundDirection direction) {
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  const Interval w = wilson_interval(hits, trials, 3.0);
  const double se = direction == BoundDirection::LowerBound ? (w.high - p) / 3.0
                                                            : (p - w.low) / 3.0;
  return make_bound_check(std::move(name), p, std::max(0.0, se), bound, direction, trials);
}

std::string label_of(std::initializer_list<std::string> parts) {
  std::string out;
  for (const std::string& p : parts) {
    if (!out.empty()) out += '/';
    out += p;
  }
  return out;
}

std::string vec_label(const std::vector<double>& z) {
  std::string s = "[";
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) s += ',';
    s += format_double(z[i]);
  }
  return s + "]";
}

bool in_box(const std::vector<double>& sum, const std::vector<double>& z, double eps) {
  for (std::size_t c = 0; c < sum.size(); ++c) {
    if (std::abs(sum[c] - z[c]) > eps) return false;
  }
  return true;
}

// Adds one NSN vector of dimension d to `sum`, scalar first then directions.
void add_nsn(RandomStream& rng, std::vector<double>& sum) {
  const double scalar = rng.normal();
  for (double& s : sum) s += scalar * rng.normal();
}

void require_target(const std::vector<double>& z, std::size_t d) {
  if (z.size() != d) throw ParameterError("target must have dimension d");
  for (double v : z) {
    if (!std::isfinite(v)) throw ParameterError("target is not finite");
  }
}

double mean_std_error(double sum, double sum_sq, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  const double var = std::max(0.0, sum_sq / nn - mean * mean);
  return std::sqrt(var / nn);
}

std::string seed_columns(SeedSpec s) {
  return std::to_string(s.master_seed) + "," + std::to_string(s.stream_id);
}

std::string phase_columns(const PhaseRow& r) {
  return std::to_string(r.n) + "," + std::to_string(r.trials) + "," +
         std::to_string(r.successes) + "," + format_double(r.rate) + "," +
         format_double(r.wilson_low) + "," + format_double(r.wilson_high);
}

PhaseRow make_row(std::size_t n, std::size_t trials, std::size_t successes) {
  PhaseRow r;
  r.n = n;
  r.trials = trials;
  r.successes = successes;
  r.rate = trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  const Interval w = wilson_interval(successes, trials);
  r.wilson_low = w.low;
  r.wilson_high = w.high;
  return r;
}

std::size_t max_of(const std::vector<std::size_t>& v) {
  if (v.empty()) throw ParameterError("n_list must not be empty");
  for (std::size_t n : v) {
    if (n == 0) throw ParameterError("n_list entries must be positive");
  }
  return *std::max_element(v.begin(), v.end());
}

double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }),
          v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string direction_name(BoundDirection direction) {
  switch (direction) {
    case BoundDirection::LowerBound: return "lower";
    case BoundDirection::UpperBound: return "upper";
    case BoundDirection::Equality: return "equal";
  }
  return "?";
}

BoundCheckResult make_bound_check(std::string name, double estimate, double std_error,
                                  double bound, BoundDirection direction,
                                  std::size_t trials) {
  BoundCheckResult r;
  r.name = std::move(name);
  r.estimate = estimate;
  r.std_error = std_error;
  r.bound = bound;
  r.direction = direction;
  r.trials = trials;
  switch (direction) {
    case BoundDirection::LowerBound:
      r.pass = estimate >= bound - 3.0 * std_error;
      break;
    case BoundDirection::UpperBound:
      r.pass = estimate <= bound + 3.0 * std_error;
      break;
    case BoundDirection::Equality:
      r.pass = std::abs(estimate - bound) <= 3.0 * std_error;
      break;
  }
  return r;
}

double binomial_std_error(std::size_t successes, std::size_t trials) {
  if (trials == 0) return 0.0;
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::size_t count_events(std::size_t trials, SeedSpec seed, const std::string& label,
                         const std::function<bool(RandomStream&)>& event) {
  return accumulate_trials<Counter>(trials, seed, label,
                                    [&](RandomStream& rng, Counter& c) {
                                      if (event(rng)) ++c.hits;
                                    })
      .hits;
}

double nsn_hit_bound(std::size_t d, std::size_t k, double epsilon) {
  const double c = c_d(d);
  const double denom = std::sqrt(std::numbers::pi * (1.0 + 2.0 * std::sqrt(c) + 2.0 * c) *
                                 static_cast<double>(k));
  return std::pow(2.0 * epsilon / denom, static_cast<double>(d)) / 16.0;
}

double joint_hit_bound(std::size_t d, std::size_t j, double epsilon) {
  const double c = c_d(d);
  const double base = 4.0 * epsilon * epsilon /
                      (std::numbers::pi * (1.0 - 2.0 * std::sqrt(c)) * static_cast<double>(j));
  return 3.0 * std::pow(base, static_cast<double>(d));
}

double intersection_tail_bound(std::size_t k, std::size_t d) {
  const double kk = static_cast<double>(k);
  const double dd = static_cast<double>(d);
  const double gap = 1.0 - dd / kk;
  return std::exp(-2.0 * kk / (dd * dd) * gap * gap);
}

double overlap_probability(std::size_t n, std::size_t k, std::size_t j) {
  if (j > k || j > n - k) return 0.0;
  return static_cast<double>(binomial(k, k - j)) * static_cast<double>(binomial(n - k, j)) /
         static_cast<double>(binomial(n, k));
}

ChiSquaredTails check_chi_squared_tails(std::size_t d, double t, std::size_t trials,
                                        SeedSpec seed) {
  if (d == 0 || !(t > 0.0)) throw ParameterError("chi-squared check needs d >= 1, t > 0");
  const double dd = static_cast<double>(d);
  const double upper_cut = dd + 2.0 * std::sqrt(dd * t) + 2.0 * t;
  const double lower_cut = dd - 2.0 * std::sqrt(dd * t);
  struct Acc {
    std::size_t upper = 0;
    std::size_t lower = 0;
    void merge(const Acc& o) {
      upper += o.upper;
      lower += o.lower;
    }
  };
  const std::string label =
      label_of({"chi2", "d=" + std::to_string(d), "t=" + format_double(t)});
  const Acc acc = accumulate_trials<Acc>(trials, seed, label, [&](RandomStream& rng, Acc& a) {
    double x = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double g = rng.normal();
      x += g * g;
    }
    if (x >= upper_cut) ++a.upper;
    if (x <= lower_cut) ++a.lower;
  });
  const double bound = std::exp(-t);
  ChiSquaredTails out;
  out.upper =
      frequency_check(label + "/upper", acc.upper, trials, bound, BoundDirection::UpperBound);
  out.lower =
      frequency_check(label + "/lower", acc.lower, trials, bound, BoundDirection::UpperBound);
  return out;
}

BoundCheckResult check_most_probable_interval(double sigma, double z, double epsilon,
                                              std::size_t trials, SeedSpec seed) {
  if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
  if (!(epsilon >= 0.0) || !std::isfinite(z)) throw ParameterError("bad interval");
  if (trials == 0) throw ParameterError("trials must be >= 1");
  struct Acc {
    std::size_t centered = 0;
    std::size_t shifted = 0;
    std::size_t differ = 0;
    void merge(const Acc& o) {
      centered += o.centered;
      shifted += o.shifted;
      differ += o.differ;
    }
  };
  const std::string label = label_of({"interval", "sigma=" + format_double(sigma),
                                      "z=" + format_double(z), "eps=" + format_double(epsilon)});
  const Acc acc = accumulate_trials<Acc>(trials, seed, label, [&](RandomStream& rng, Acc& a) {
    const double x = sigma * rng.normal();
    const bool c = std::abs(x) <= epsilon;
    const bool s = std::abs(x - z) <= epsilon;
    a.centered += c;
    a.shifted += s;
    a.differ += c != s;
  });
  const double n = static_cast<double>(trials);
  const double diff = (static_cast<double>(acc.shifted) - static_cast<double>(acc.centered)) / n;
  const double var = std::max(0.0, static_cast<double>(acc.differ) / n - diff * diff);
  return make_bound_check(label, static_cast<double>(acc.shifted) / n, std::sqrt(var / n),
                          static_cast<double>(acc.centered) / n, BoundDirection::UpperBound,
                          trials);
}

BoundCheckResult check_nsn_hit_lower_bound(std::size_t d, std::size_t k, double epsilon,
                                           const std::vector<double>& z,
                                           std::size_t trials, SeedSpec seed) {
  if (k < 16) throw ParameterError("NSN hit bound needs k >= 16");
  if (d == 0 || d > k) throw ParameterError("NSN hit bound needs 1 <= d <= k");
  if (!(epsilon > 0.0 && epsilon < 0.25)) throw ParameterError("NSN hit bound needs 0 < eps < 1/4");
  require_target(z, d);
  double l1 = 0.0;
  for (double v : z) l1 += std::abs(v);
  if (l1 > std::sqrt(static_cast<double>(k))) throw ParameterError("need ||z||_1 <= sqrt(k)");
  if (trials == 0) throw ParameterError("trials must be >= 1");

  const std::string label = label_of({"nsn-hit", "d=" + std::to_string(d),
                                      "k=" + std::to_string(k),
                                      "eps=" + format_double(epsilon), "z=" + vec_label(z)});
  const std::size_t hits = count_events(trials, seed, label, [&](RandomStream& rng) {
    std::vector<double> sum(d, 0.0);
    for (std::size_t i = 0; i < k; ++i) add_nsn(rng, sum);
    return in_box(sum, z, epsilon);
  });
  return frequency_check(label, hits, trials, nsn_hit_bound(d, k, epsilon),
                         BoundDirection::LowerBound);
}

BoundCheckResult check_joint_upper_bound(std::size_t d, std::size_t k, std::size_t j,
                                         double epsilon, const std::vector<double>& z,
                                         std::size_t trials, SeedSpec seed) {
  if (k < 64) throw ParameterError("joint bound check needs k >= 64");
  if (j < 1 || j > k) throw ParameterError("joint bound check needs 1 <= j <= k");
  if (d == 0) throw ParameterError("d must be >= 1");
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  require_target(z, d);
  if (trials == 0) throw ParameterError("trials must be >= 1");

  const std::string label =
      label_of({"joint", "d=" + std::to_string(d), "k=" + std::to_string(k),
                "j=" + std::to_string(j), "eps=" + format_double(epsilon), "z=" + vec_label(z)});
  const std::size_t hits = count_events(trials, seed, label, [&](RandomStream& rng) {
    std::vector<double> a(d, 0.0), b(d, 0.0), c(d, 0.0);
    for (std::size_t i = 0; i < j; ++i) add_nsn(rng, a);
    for (std::size_t i = j; i < k; ++i) add_nsn(rng, b);
    for (std::size_t i = k; i < k + j; ++i) add_nsn(rng, c);
    std::vector<double> ab(d), bc(d);
    for (std::size_t t = 0; t < d; ++t) {
      ab[t] = a[t] + b[t];
      bc[t] = b[t] + c[t];
    }
    return in_box(ab, z, epsilon) && in_box(bc, z, epsilon);
  });
  return frequency_check(label, hits, trials, joint_hit_bound(d, j, epsilon),
                         BoundDirection::UpperBound);
}

SecondMomentReport check_second_moment_identity(std::size_t n, std::size_t k, std::size_t d,
                                                double epsilon, const std::vector<double>& z,
                                                std::size_t trials, SeedSpec seed) {
  if (n > 10 || k > 4) {
    throw BudgetError("second-moment check enumerates pairs of subsets; needs n <= 10, k <= 4");
  }
  if (k == 0 || k > n || d == 0) throw ParameterError("need 1 <= k <= n and d >= 1");
  if (!(epsilon >= 0.0)) throw ParameterError("epsilon must be non-negative");
  require_target(z, d);
  if (trials == 0) throw ParameterError("trials must be >= 1");

  const std::size_t max_j = std::min(k, n - k);
  const double family = static_cast<double>(binomial(n, k));
  std::vector<double> weights(max_j + 1);
  for (std::size_t j = 0; j <= max_j; ++j) weights[j] = overlap_probability(n, k, j);

  // All k-subsets as index lists, plus the fixed S0 and S_j.
  std::vector<std::vector<std::size_t>> subsets;
  {
    std::vector<std::size_t> cur(k);
    std::function<void(std::size_t, std::size_t)> gen = [&](std::size_t start, std::size_t depth) {
      if (depth == k) {
        subsets.push_back(cur);
        return;
      }
      for (std::size_t i = start; i + (k - depth) <= n; ++i) {
        cur[depth] = i;
        gen(i + 1, depth + 1);
      }
    };
    gen(0, 0);
  }
  std::vector<std::vector<std::size_t>> anchored(max_j + 1);
  for (std::size_t j = 0; j <= max_j; ++j) {
    for (std::size_t i = 0; i < k - j; ++i) anchored[j].push_back(i);
    for (std::size_t i = k; i < k + j; ++i) anchored[j].push_back(i);
  }

  struct Acc {
    double t = 0, t2 = 0, e0 = 0, d1 = 0, d1sq = 0, d2 = 0, d2sq = 0;
    std::vector<double> pair;
    void merge(const Acc& o) {
      t += o.t;
      t2 += o.t2;
      e0 += o.e0;
      d1 += o.d1;
      d1sq += o.d1sq;
      d2 += o.d2;
      d2sq += o.d2sq;
      if (pair.size() < o.pair.size()) pair.resize(o.pair.size(), 0.0);
      for (std::size_t j = 0; j < o.pair.size(); ++j) pair[j] += o.pair[j];
    }
  };

  const std::string label =
      label_of({"second-moment", "n=" + std::to_string(n), "k=" + std::to_string(k),
                "d=" + std::to_string(d), "eps=" + format_double(epsilon), "z=" + vec_label(z)});
  const Acc acc = accumulate_trials<Acc>(trials, seed, label, [&](RandomStream& rng, Acc& a) {
    if (a.pair.empty()) a.pair.assign(max_j + 1, 0.0);
    std::vector<double> vectors(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      const double scalar = rng.normal();
      for (std::size_t c = 0; c < d; ++c) vectors[i * d + c] = scalar * rng.normal();
    }
    auto hit = [&](const std::vector<std::size_t>& s) {
      std::vector<double> sum(d, 0.0);
      for (std::size_t i : s)
        for (std::size_t c = 0; c < d; ++c) sum[c] += vectors[i * d + c];
      return in_box(sum, z, epsilon);
    };
    double t = 0.0;
    for (const auto& s : subsets) t += hit(s) ? 1.0 : 0.0;
    const bool e0 = hit(anchored[0]);
    double decomposition = 0.0;
    for (std::size_t j = 0; j <= max_j; ++j) {
      const bool both = e0 && hit(anchored[j]);
      a.pair[j] += both;
      decomposition += weights[j] * (both ? 1.0 : 0.0);
    }
    const double d1 = t - family * (e0 ? 1.0 : 0.0);
    const double d2 = t * t - family * family * decomposition;
    a.t += t;
    a.t2 += t * t;
    a.e0 += e0;
    a.d1 += d1;
    a.d1sq += d1 * d1;
    a.d2 += d2;
    a.d2sq += d2 * d2;
  });

  const double nn = static_cast<double>(trials);
  SecondMomentReport r;
  r.mean_t = acc.t / nn;
  r.mean_t2 = acc.t2 / nn;
  r.p_s0 = acc.e0 / nn;
  r.overlap_weight = weights;
  double predicted_t2 = 0.0;
  for (std::size_t j = 0; j <= max_j; ++j) {
    const double p = j < acc.pair.size() ? acc.pair[j] / nn : 0.0;
    r.pair_probability.push_back(p);
    predicted_t2 += weights[j] * p;
  }
  predicted_t2 *= family * family;
  r.first_moment = make_bound_check(label + "/first", r.mean_t, mean_std_error(acc.d1, acc.d1sq, trials),
                                    family * r.p_s0, BoundDirection::Equality, trials);
  r.second_moment = make_bound_check(label + "/second", r.mean_t2,
                                     mean_std_error(acc.d2, acc.d2sq, trials), predicted_t2,
                                     BoundDirection::Equality, trials);
  return r;
}

BoundCheckResult check_intersection_tail(std::size_t n, std::size_t k, std::size_t d,
                                         std::size_t trials, SeedSpec seed) {
  if (d < 2 || k <= d) throw ParameterError("intersection tail needs d >= 2 and k > d");
  if (n < k * k) throw ParameterError("intersection tail needs n >= k^2");
  if (trials == 0) throw ParameterError("trials must be >= 1");
  const std::size_t threshold = (k + d - 1) / d;  // |S & S'| >= k/d
  const std::string label = label_of({"intersection", "n=" + std::to_string(n),
                                      "k=" + std::to_string(k), "d=" + std::to_string(d)});
  struct Acc {
    std::size_t hits = 0;
    std::vector<std::uint32_t> first, second;
    std::uint32_t stamp = 0;
    void merge(const Acc& o) { hits += o.hits; }
  };
  // Robert Floyd's sampling of a uniform k-subset, marked by `stamp`.
  auto floyd = [&](RandomStream& rng, std::vector<std::uint32_t>& mark, std::uint32_t stamp,
                   auto&& on_pick) {
    for (std::size_t j = n - k; j < n; ++j) {
      std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
      if (mark[t] == stamp) t = j;
      mark[t] = stamp;
      on_pick(t);
    }
  };
  const Acc acc = accumulate_trials<Acc>(trials, seed, label, [&](RandomStream& rng, Acc& a) {
    if (a.first.empty()) {
      a.first.assign(n, 0);
      a.second.assign(n, 0);
    }
    ++a.stamp;
    floyd(rng, a.first, a.stamp, [](std::size_t) {});
    std::size_t overlap = 0;
    floyd(rng, a.second, a.stamp, [&](std::size_t t) { overlap += a.first[t] == a.stamp; });
    if (overlap >= threshold) ++a.hits;
  });
  return frequency_check(label, acc.hits, trials, intersection_tail_bound(k, d),
                         BoundDirection::UpperBound);
}

std::vector<BoundCheckResult> run_lemma_checks(const LemmaCheckPlan& plan) {
  std::vector<BoundCheckResult> out;
  out.push_back(check_most_probable_interval(1.0, 0.0, 0.1, plan.hit_trials, plan.seed));
  out.push_back(check_most_probable_interval(1.0, 2.0, 0.1, plan.hit_trials, plan.seed));
  for (std::size_t d : {1, 4, 16}) {
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      const ChiSquaredTails tails = check_chi_squared_tails(d, t, plan.tail_trials, plan.seed);
      out.push_back(tails.upper);
      out.push_back(tails.lower);
    }
  }
  for (std::size_t d : {1, 2, 3}) {
    out.push_back(check_nsn_hit_lower_bound(d, 64, 0.2, std::vector<double>(d, 0.0),
                                            plan.hit_trials, plan.seed));
  }
  for (std::size_t d : {1, 2}) {
    for (std::size_t j : {8, 32, 64}) {
      out.push_back(check_joint_upper_bound(d, 64, j, 0.1, std::vector<double>(d, 0.0),
                                            plan.hit_trials, plan.seed));
    }
  }
  const SecondMomentReport moments =
      check_second_moment_identity(6, 2, 1, 0.3, {0.0}, plan.moment_trials, plan.seed);
  out.push_back(moments.first_moment);
  out.push_back(moments.second_moment);
  out.push_back(check_intersection_tail(1296, 36, 3, plan.tail_trials, plan.seed));
  return out;
}

std::vector<PhaseRow> scan_rssp_phase(const RsspScanPlan& plan) {
  const std::size_t max_n = max_of(plan.n_list);
  if (max_n > 63) throw CapacityError("rssp scan supports n <= 63");
  if (plan.trials == 0) throw ParameterError("trials must be >= 1");
  if (!(plan.epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  const std::vector<double> grid = linear_grid(-1.0, 1.0, plan.grid_size);
  const std::uint64_t tag = hash_label(
      label_of({"rssp-scan", "eps=" + format_double(plan.epsilon),
                "grid=" + std::to_string(plan.grid_size), "max_n=" + std::to_string(max_n)}));
  const std::size_t cols = plan.n_list.size();
  std::vector<std::uint8_t> success(plan.trials * cols, 0);
  parallel_for(plan.trials, [&](std::size_t trial) {
    RandomStream rng(derive_stream(plan.seed, tag, trial));
    std::vector<double> xs(max_n);
    for (double& x : xs) x = rng.uniform(-1.0, 1.0);
    for (std::size_t c = 0; c < cols; ++c) {
      const RsspMitmSolver solver(std::span<const double>(xs).first(plan.n_list[c]));
      bool all = true;
      for (double z : grid) {
        if (!solver.solve(z, plan.epsilon).found()) {
          all = false;
          break;
        }
      }
      success[trial * cols + c] = all;
    }
  });
  std::vector<PhaseRow> rows;
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t hits = 0;
    std::vector<std::uint8_t> outcomes(plan.trials);
    for (std::size_t t = 0; t < plan.trials; ++t) {
      outcomes[t] = success[t * cols + c];
      hits += outcomes[t];
    }
    PhaseRow row = make_row(plan.n_list[c], plan.trials, hits);
    row.trial_success = std::move(outcomes);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string rssp_phase_csv(const RsspScanPlan& plan, const std::vector<PhaseRow>& rows) {
  std::string out = "n,trials,successes,rate,wilson_low,wilson_high,epsilon,grid_size,"
                    "master_seed,stream_id\n";
  for (const PhaseRow& r : rows) {
    out += phase_columns(r) + "," + format_double(plan.epsilon) + "," +
           std::to_string(plan.grid_size) + "," + seed_columns(plan.seed) + "\n";
  }
  return out;
}

std::vector<PhaseRow> scan_mrss_phase(const MrssScanPlan& plan) {
  const std::size_t max_n = max_of(plan.n_list);
  if (plan.d == 0 || plan.k == 0) throw ParameterError("d and k must be >= 1");
  if (plan.trials == 0) throw ParameterError("trials must be >= 1");
  const std::uint64_t tag = hash_label(label_of(
      {"mrss-scan", "d=" + std::to_string(plan.d), "k=" + std::to_string(plan.k),
       "eps=" + format_double(plan.epsilon), "r=" + format_double(plan.target_radius),
       "max_n=" + std::to_string(max_n)}));
  const std::size_t cols = plan.n_list.size();
  std::vector<std::uint8_t> success(plan.trials * cols, 0);
  SolverParams params;
  params.epsilon = plan.epsilon;
  params.k = plan.k;
  params.mode = CardinalityMode::Exact;
  params.strategy = plan.strategy;
  params.enumeration_budget = plan.enumeration_budget;
  parallel_for(plan.trials, [&](std::size_t trial) {
    const SeedSpec trial_seed = derive_stream(plan.seed, tag, trial);
    const NsnEnsemble ens =
        sample_nsn(max_n, plan.d, derive_stream(trial_seed, hash_label("ensemble"), 0));
    RandomStream target_rng(derive_stream(trial_seed, hash_label("target"), 0));
    const double half_width = plan.target_radius / static_cast<double>(plan.d);
    std::vector<double> target(plan.d);
    for (double& v : target) v = target_rng.uniform(-half_width, half_width);
    SolverParams p = params;
    p.seed = trial_seed;
    const VectorSet all = VectorSet::of(ens);
    for (std::size_t c = 0; c < cols; ++c) {
      const VectorSet vs = all.slice(0, plan.n_list[c]);
      bool ok = false;
      if (plan.group_size) {
        if (vs.count() >= *plan.group_size) {
          ok = partition_boost(vs, {target}, *plan.group_size, p)[0].solution.has_value();
        }
      } else if (vs.count() >= plan.k) {
        ok = solve_mrss(vs, target, p).found();
      }
      success[trial * cols + c] = ok;
    }
  });
  std::vector<PhaseRow> rows;
  for (std::size_t c = 0; c < cols; ++c) {
    std::size_t hits = 0;
    for (std::size_t t = 0; t < plan.trials; ++t) hits += success[t * cols + c];
    rows.push_back(make_row(plan.n_list[c], plan.trials, hits));
  }
  return rows;
}

std::string mrss_phase_csv(const MrssScanPlan& plan, const std::vector<PhaseRow>& rows) {
  std::string out = "n,trials,successes,rate,wilson_low,wilson_high,d,k,epsilon,"
                    "target_radius,strategy,group_size,master_seed,stream_id\n";
  for (const PhaseRow& r : rows) {
    out += phase_columns(r) + "," + std::to_string(plan.d) + "," + std::to_string(plan.k) +
           "," + format_double(plan.epsilon) + "," + format_double(plan.target_radius) + "," +
           strategy_name(plan.strategy) + "," +
           (plan.group_size ? std::to_string(*plan.group_size) : std::string("0")) + "," +
           seed_columns(plan.seed) + "\n";
  }
  return out;
}

std::vector<PruneScanRow> scan_prune_success(const PruneScanPlan& plan) {
  max_of(plan.n_list);
  if (plan.d == 0 || plan.c0 == 0 || plan.c1 == 0) throw ParameterError("shape must be positive");
  if (plan.trials == 0) throw ParameterError("trials must be >= 1");
  plan.params.validate();
  const std::uint64_t tag = hash_label(
      label_of({"prune-scan", "d=" + std::to_string(plan.d), "c0=" + std::to_string(plan.c0),
                "c1=" + std::to_string(plan.c1)}));
  std::vector<PruneScanRow> rows;
  for (std::size_t n : plan.n_list) {
    std::vector<LayerReport> reports(plan.trials);
    // Channel solves already fan out inside prune_single_layer.
    for (std::size_t trial = 0; trial < plan.trials; ++trial) {
      const SeedSpec trial_seed = derive_stream(plan.params.seed, tag, trial);
      const LayerInstance inst = sample_layer_instance(plan.d, plan.c0, plan.c1, n, trial_seed);
      PruneParams p = plan.params;
      p.seed = trial_seed;
      reports[trial] = prune_single_layer(inst.u, inst.v, inst.k, p).report;
    }
    std::size_t successes = 0, channel_hits = 0, channels = 0;
    std::vector<double> errors, ratios;
    for (const LayerReport& r : reports) {
      successes += r.all_success();
      for (const ChannelResult& c : r.channels) {
        channel_hits += c.success;
        ++channels;
      }
      errors.push_back(r.probe_error);
      ratios.push_back(r.certified_ratio);
    }
    PruneScanRow row;
    row.phase = make_row(n, plan.trials, successes);
    row.channel_success_rate =
        channels ? static_cast<double>(channel_hits) / static_cast<double>(channels) : 0.0;
    row.median_probe_error = median_of(errors);
    row.median_certified_ratio = median_of(ratios);
    rows.push_back(row);
  }
  return rows;
}

std::string prune_scan_csv(const PruneScanPlan& plan, const std::vector<PruneScanRow>& rows) {
  const PruneParams& p = plan.params;
  std::string out =
      "n,trials,successes,rate,wilson_low,wilson_high,channel_success_rate,"
      "median_probe_error,median_certified_ratio,d,c0,c1,epsilon,input_bound,k_budget,"
      "strategy,mode,probe_count,probe_spatial,master_seed,stream_id\n";
  for (const PruneScanRow& r : rows) {
    const std::size_t k = p.k_budget.value_or(default_k_budget(r.phase.n, plan.d, p.epsilon));
    out += phase_columns(r.phase) + "," + format_double(r.channel_success_rate) + "," +
           format_double(r.median_probe_error) + "," + format_double(r.median_certified_ratio) +
           "," + std::to_string(plan.d) + "," + std::to_string(plan.c0) + "," +
           std::to_string(plan.c1) + "," + format_double(p.epsilon) + "," +
           format_double(p.input_bound) + "," + std::to_string(k) + "," +
           strategy_name(p.strategy) + "," +
           (p.mode == CardinalityMode::Exact ? "exact" : "at-most") + "," +
           std::to_string(p.probe_count) + "," + std::to_string(p.probe_spatial) + "," +
           seed_columns(p.seed) + "\n";
  }
  return out;
}

std::string bound_checks_csv(const std::vector<BoundCheckResult>& results) {
  std::string out = "name,estimate,std_error,bound,direction,trials,pass\n";
  for (const BoundCheckResult& r : results) {
    out += r.name + "," + format_double(r.estimate) + "," + format_double(r.std_error) + "," +
           format_double(r.bound) + "," + direction_name(r.direction) + "," +
           std::to_string(r.trials) + "," + (r.pass ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace slth
