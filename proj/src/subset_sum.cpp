#include "slth/subset_sum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

#include "slth/error.hpp"

namespace slth {
namespace {

// Slack added to box tests on re-associated sums before the ascending-order
// re-evaluation decides.
constexpr double kReassociationSlack = 1e-9;
// Pinned quarter pairs tried before the full sorted-stream scan.
constexpr std::size_t kQuickAttempts = 32;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_epsilon(double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ParameterError("epsilon must be finite and non-negative");
  }
}

void require_target(const VectorSet& vs, std::span<const double> target) {
  if (target.size() != vs.dim()) {
    throw ShapeError("target has dimension " + std::to_string(target.size()) +
                     ", vectors have " + std::to_string(vs.dim()));
  }
  for (double v : target) {
    if (!std::isfinite(v)) throw ParameterError("target is not finite");
  }
}

double residual_inf(std::span<const double> sum, std::span<const double> target) {
  double r = 0.0;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    r = std::max(r, std::abs(sum[c] - target[c]));
  }
  return r;
}

std::vector<std::size_t> mask_indices(std::uint64_t mask) {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(std::popcount(mask)));
  while (mask != 0) {
    out.push_back(static_cast<std::size_t>(std::countr_zero(mask)));
    mask &= mask - 1;
  }
  return out;
}

// Keeps the lowest residual; ties go to the lexicographically smaller set.
void offer(std::optional<SubsetSolution>& best, SubsetSolution candidate) {
  if (!best || candidate.residual_inf < best->residual_inf ||
      (candidate.residual_inf == best->residual_inf &&
       lex_less(candidate.indices, best->indices))) {
    best = std::move(candidate);
  }
}

SolveOutcome finish(std::optional<SubsetSolution> best, double epsilon,
                    bool exact) {
  SolveOutcome out;
  out.best = std::move(best);
  if (out.best && out.best->residual_inf <= epsilon) {
    out.status = SolveStatus::Found;
    out.solution = out.best;
  } else {
    out.status = exact ? SolveStatus::ProvenInfeasible : SolveStatus::NotFound;
  }
  return out;
}

// Depth-first walk over the subsets of size <= max_size in lexicographic
// order. `visit` sees every subset whose size satisfies the mode, together
// with its ascending-order sum.
template <typename Visit>
class SubsetWalker {
 public:
  SubsetWalker(const VectorSet& vs, std::size_t k, CardinalityMode mode,
               Visit visit)
      : vs_(vs), k_(k), mode_(mode), visit_(std::move(visit)),
        sums_((k + 1) * vs.dim(), 0.0) {
    stack_.reserve(k);
  }

  void run() { descend(0); }

 private:
  const VectorSet& vs_;
  std::size_t k_;
  CardinalityMode mode_;
  Visit visit_;
  std::vector<std::size_t> stack_;
  std::vector<double> sums_;

  void descend(std::size_t start) {
    const std::size_t depth = stack_.size();
    const std::size_t d = vs_.dim();
    if (mode_ == CardinalityMode::AtMost || depth == k_) {
      visit_(std::span<const std::size_t>(stack_),
             std::span<const double>(sums_.data() + depth * d, d));
    }
    if (depth == k_) return;
    const std::size_t n = vs_.count();
    for (std::size_t i = start; i < n; ++i) {
      if (mode_ == CardinalityMode::Exact && depth + (n - i) < k_) break;
      const auto row = vs_.row(i);
      double* next = sums_.data() + (depth + 1) * d;
      const double* cur = sums_.data() + depth * d;
      for (std::size_t c = 0; c < d; ++c) next[c] = cur[c] + row[c];
      stack_.push_back(i);
      descend(i + 1);
      stack_.pop_back();
    }
  }
};

template <typename Visit>
void walk_subsets(const VectorSet& vs, std::size_t k, CardinalityMode mode,
                  Visit visit) {
  SubsetWalker<Visit> walker(vs, k, mode, std::move(visit));
  walker.run();
}

std::size_t effective_k(const VectorSet& vs, const SolverParams& params) {
  if (params.mode == CardinalityMode::Exact) {
    if (params.k < 1 || params.k > vs.count()) {
      throw ParameterError("exact cardinality requires 1 <= k <= n (k=" +
                           std::to_string(params.k) +
                           ", n=" + std::to_string(vs.count()) + ")");
    }
    return params.k;
  }
  return std::min(params.k, vs.count());
}

SolveOutcome solve_exhaustive(const VectorSet& vs, std::span<const double> target,
                              double epsilon, std::size_t k,
                              CardinalityMode mode, std::size_t budget) {
  const std::uint64_t family = family_size(vs.count(), k, mode);
  if (family > budget) {
    throw BudgetError("exhaustive enumeration needs " + std::to_string(family) +
                      " subsets, budget is " + std::to_string(budget));
  }
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_indices;
  bool have = false;
  walk_subsets(vs, k, mode,
               [&](std::span<const std::size_t> idx, std::span<const double> sum) {
                 const double r = residual_inf(sum, target);
                 // Lexicographic visiting order makes strict '<' the tie rule.
                 if (!have || r < best_residual) {
                   have = true;
                   best_residual = r;
                   best_indices.assign(idx.begin(), idx.end());
                 }
               });
  std::optional<SubsetSolution> best;
  if (have) best = evaluate_subset(vs, std::move(best_indices), target);
  return finish(std::move(best), epsilon, /*exact=*/true);
}

// Table of all subset sums of rows [first, first + m), addressed by local mask.
std::vector<double> subset_sum_table(const VectorSet& vs, std::size_t first,
                                     std::size_t m) {
  const std::size_t d = vs.dim();
  const std::size_t size = std::size_t{1} << m;
  std::vector<double> table(size * d, 0.0);
  for (std::size_t mask = 1; mask < size; ++mask) {
    const std::size_t low = static_cast<std::size_t>(std::countr_zero(mask));
    const std::size_t rest = mask & (mask - 1);
    const auto row = vs.row(first + low);
    for (std::size_t c = 0; c < d; ++c) {
      table[mask * d + c] = table[rest * d + c] + row[c];
    }
  }
  return table;
}

std::uint64_t cell_key(std::span<const std::int64_t> cells) {
  std::uint64_t h = 0x51ED270B27A1F3C5ull;
  for (std::int64_t c : cells) h = mix64(h ^ static_cast<std::uint64_t>(c));
  return h;
}

SolveOutcome solve_mitm(const VectorSet& vs, std::span<const double> target,
                        double epsilon, std::size_t k, CardinalityMode mode,
                        std::size_t budget) {
  const std::size_t n = vs.count();
  const std::size_t d = vs.dim();
  if (n > 63) {
    throw CapacityError("meet-in-the-middle supports at most 63 vectors, got " +
                        std::to_string(n));
  }
  const std::size_t left_bits = n / 2;
  const std::size_t right_bits = n - left_bits;
  if ((std::uint64_t{1} << right_bits) > budget) {
    throw BudgetError("meet-in-the-middle half table of 2^" +
                      std::to_string(right_bits) + " exceeds budget " +
                      std::to_string(budget));
  }

  // Left half: bucket sums on a grid over the leading coordinates so that each
  // right sum only probes the cells its epsilon box can touch.
  const std::vector<double> left = subset_sum_table(vs, 0, left_bits);
  const std::size_t left_size = std::size_t{1} << left_bits;
  const std::size_t grid_dims = std::min<std::size_t>(d, 4);
  const double radius = epsilon + kReassociationSlack;
  const double cell = 2.0 * radius;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> buckets(left_size);
  std::vector<std::int64_t> cells(grid_dims);
  for (std::size_t mask = 0; mask < left_size; ++mask) {
    for (std::size_t c = 0; c < grid_dims; ++c) {
      cells[c] = static_cast<std::int64_t>(std::floor(left[mask * d + c] / cell));
    }
    buckets[mask] = {cell_key(cells), static_cast<std::uint32_t>(mask)};
  }
  std::sort(buckets.begin(), buckets.end());

  // Right half is rebuilt from two quarter tables to keep memory at one half.
  const std::size_t q1_bits = right_bits / 2;
  const std::size_t q2_bits = right_bits - q1_bits;
  const std::vector<double> q1 = subset_sum_table(vs, left_bits, q1_bits);
  const std::vector<double> q2 = subset_sum_table(vs, left_bits + q1_bits, q2_bits);

  std::optional<SubsetSolution> best;
  std::vector<double> right(d);
  std::vector<std::int64_t> lo_cell(grid_dims), hi_cell(grid_dims);
  for (std::size_t m2 = 0; m2 < (std::size_t{1} << q2_bits); ++m2) {
    for (std::size_t m1 = 0; m1 < (std::size_t{1} << q1_bits); ++m1) {
      const std::uint64_t right_mask =
          static_cast<std::uint64_t>(m1) | (static_cast<std::uint64_t>(m2) << q1_bits);
      const int right_pop = std::popcount(right_mask);
      if (static_cast<std::size_t>(right_pop) > k) continue;
      for (std::size_t c = 0; c < d; ++c) right[c] = q1[m1 * d + c] + q2[m2 * d + c];
      for (std::size_t c = 0; c < grid_dims; ++c) {
        const double want = target[c] - right[c];
        lo_cell[c] = static_cast<std::int64_t>(std::floor((want - radius) / cell));
        hi_cell[c] = static_cast<std::int64_t>(std::floor((want + radius) / cell));
      }
      // Odometer over the (at most 2 per axis) touched cells.
      cells = lo_cell;
      for (;;) {
        const std::uint64_t key = cell_key(cells);
        auto it = std::lower_bound(buckets.begin(), buckets.end(),
                                   std::make_pair(key, std::uint32_t{0}));
        for (; it != buckets.end() && it->first == key; ++it) {
          const std::uint64_t left_mask = it->second;
          const std::size_t pop =
              static_cast<std::size_t>(std::popcount(left_mask) + right_pop);
          if (mode == CardinalityMode::Exact ? pop != k : pop > k) continue;
          bool inside = true;
          for (std::size_t c = 0; c < d && inside; ++c) {
            inside = std::abs(left[left_mask * d + c] + right[c] - target[c]) <= radius;
          }
          if (!inside) continue;
          SubsetSolution cand = evaluate_subset(
              vs, mask_indices(left_mask | (right_mask << left_bits)), target);
          if (cand.residual_inf <= epsilon) offer(best, std::move(cand));
        }
        std::size_t axis = 0;
        while (axis < grid_dims && cells[axis] == hi_cell[axis]) {
          cells[axis] = lo_cell[axis];
          ++axis;
        }
        if (axis == grid_dims) break;
        ++cells[axis];
      }
    }
  }
  return finish(std::move(best), epsilon, /*exact=*/true);
}

// Lexicographic objective: infinity-norm residual, then squared residual.
struct Objective {
  double inf = 0.0;
  double sq = 0.0;
  bool operator<(const Objective& o) const {
    return inf < o.inf || (inf == o.inf && sq < o.sq);
  }
};

Objective objective(std::span<const double> sum, std::span<const double> target) {
  Objective o;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    const double r = sum[c] - target[c];
    o.inf = std::max(o.inf, std::abs(r));
    o.sq += r * r;
  }
  return o;
}

class LocalSearch {
 public:
  LocalSearch(const VectorSet& vs, std::span<const double> target, std::size_t k,
              CardinalityMode mode, double epsilon)
      : vs_(vs), target_(target), k_(k), mode_(mode), epsilon_(epsilon),
        in_set_(vs.count(), false), sum_(vs.dim(), 0.0), probe_(vs.dim()) {}

  void reset() {
    std::fill(in_set_.begin(), in_set_.end(), false);
    members_.clear();
    recompute();
  }

  void greedy_start() {
    reset();
    const std::size_t n = vs_.count();
    while (members_.size() < k_) {
      std::optional<std::size_t> pick;
      Objective pick_obj;
      for (std::size_t j = 0; j < n; ++j) {
        if (in_set_[j]) continue;
        const Objective o = moved(std::nullopt, j);
        if (!pick || o < pick_obj) {
          pick = j;
          pick_obj = o;
        }
      }
      if (!pick) break;
      if (mode_ == CardinalityMode::AtMost && !(pick_obj < current_)) break;
      add(*pick);
    }
  }

  void random_start(RandomStream& rng) {
    reset();
    const std::size_t n = vs_.count();
    std::size_t size = k_;
    if (mode_ == CardinalityMode::AtMost) size = rng.below(k_ + 1);
    // Partial Fisher-Yates over the index range.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t j = i + rng.below(n - i);
      std::swap(perm[i], perm[j]);
      in_set_[perm[i]] = true;
      members_.push_back(perm[i]);
    }
    recompute();
  }

  void improve(std::size_t max_iters) {
    const std::size_t n = vs_.count();
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
      if (current_.inf <= epsilon_) return;
      Objective best = current_;
      std::optional<std::size_t> out_idx, in_idx;
      bool improved = false;
      auto consider = [&](std::optional<std::size_t> out, std::optional<std::size_t> in) {
        const Objective o = moved(out, in);
        if (o < best) {
          best = o;
          out_idx = out;
          in_idx = in;
          improved = true;
        }
      };
      for (std::size_t a = 0; a < members_.size(); ++a) {
        for (std::size_t j = 0; j < n; ++j) {
          if (!in_set_[j]) consider(members_[a], j);
        }
      }
      if (mode_ == CardinalityMode::AtMost) {
        if (members_.size() < k_) {
          for (std::size_t j = 0; j < n; ++j) {
            if (!in_set_[j]) consider(std::nullopt, j);
          }
        }
        for (std::size_t a = 0; a < members_.size(); ++a) {
          consider(members_[a], std::nullopt);
        }
      }
      if (!improved) return;
      if (out_idx) remove(*out_idx);
      if (in_idx) add(*in_idx);
    }
  }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out = members_;
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const VectorSet& vs_;
  std::span<const double> target_;
  std::size_t k_;
  CardinalityMode mode_;
  double epsilon_;
  std::vector<bool> in_set_;
  std::vector<std::size_t> members_;
  std::vector<double> sum_;
  std::vector<double> probe_;
  Objective current_;

  Objective moved(std::optional<std::size_t> out, std::optional<std::size_t> in) {
    for (std::size_t c = 0; c < sum_.size(); ++c) {
      double v = sum_[c];
      if (out) v -= vs_.row(*out)[c];
      if (in) v += vs_.row(*in)[c];
      probe_[c] = v;
    }
    return objective(probe_, target_);
  }

  void add(std::size_t j) {
    in_set_[j] = true;
    members_.push_back(j);
    recompute();
  }

  void remove(std::size_t j) {
    in_set_[j] = false;
    members_.erase(std::find(members_.begin(), members_.end(), j));
    recompute();
  }

  // Ascending-order sum, so the search objective matches evaluate_subset.
  void recompute() {
    std::fill(sum_.begin(), sum_.end(), 0.0);
    for (std::size_t i = 0; i < vs_.count(); ++i) {
      if (!in_set_[i]) continue;
      const auto row = vs_.row(i);
      for (std::size_t c = 0; c < sum_.size(); ++c) sum_[c] += row[c];
    }
    current_ = objective(sum_, target_);
  }
};

SolveOutcome solve_greedy(const VectorSet& vs, std::span<const double> target,
                          double epsilon, std::size_t k, CardinalityMode mode,
                          const GreedySwap& config, SeedSpec seed) {
  LocalSearch search(vs, target, k, mode, epsilon);
  std::optional<SubsetSolution> best;
  const std::size_t rounds = std::max<std::size_t>(config.restarts, 1);
  for (std::size_t round = 0; round < rounds; ++round) {
    if (round == 0) {
      search.greedy_start();
    } else {
      RandomStream rng(derive_stream(seed, hash_label("greedy-swap"), round));
      search.random_start(rng);
    }
    search.improve(config.max_iters);
    offer(best, evaluate_subset(vs, search.members(), target));
    if (best->residual_inf <= epsilon) break;
  }
  return finish(std::move(best), epsilon, /*exact=*/false);
}

// Sorted stream over all pair sums a[i] + b[j] of two ascending tables, merged
// lazily through a heap. Descending streams read both tables backwards.
class PairStream {
 public:
  using Entry = RsspMitmSolver::Entry;

  PairStream(const std::vector<Entry>& a, const std::vector<Entry>& b, bool descending)
      : a_(a), b_(b), descending_(descending) {
    push(0, 0);
  }

  std::optional<Entry> next() {
    if (heap_.empty()) return std::nullopt;
    const auto [key, i, j] = heap_.top();
    heap_.pop();
    if (j + 1 < b_.size()) push(i, j + 1);
    if (j == 0 && i + 1 < a_.size()) push(i + 1, 0);
    const Entry& x = at(a_, i);
    const Entry& y = at(b_, j);
    return Entry{x.sum + y.sum, x.mask | y.mask};
  }

 private:
  using Key = std::tuple<double, std::size_t, std::size_t>;
  const std::vector<Entry>& a_;
  const std::vector<Entry>& b_;
  bool descending_;
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> heap_;

  const Entry& at(const std::vector<Entry>& t, std::size_t i) const {
    return descending_ ? t[t.size() - 1 - i] : t[i];
  }

  void push(std::size_t i, std::size_t j) {
    const double s = at(a_, i).sum + at(b_, j).sum;
    heap_.emplace(descending_ ? -s : s, i, j);
  }
};

}  // namespace

RsspMitmSolver::RsspMitmSolver(std::span<const double> xs)
    : xs_(xs.begin(), xs.end()) {
  const std::size_t n = xs_.size();
  if (n > 63) {
    throw CapacityError("meet-in-the-middle supports at most 63 values, got " +
                        std::to_string(n));
  }
  for (double x : xs_) {
    if (!std::isfinite(x)) throw ParameterError("value is not finite");
  }
  const std::size_t half = n / 2;
  const std::size_t bounds[5] = {0, half / 2, half, half + (n - half) / 2, n};
  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t first = bounds[q];
    const std::size_t bits = bounds[q + 1] - first;
    std::vector<Entry>& items = quarters_[q];
    items.assign(std::size_t{1} << bits, Entry{0.0, 0});
    for (std::size_t mask = 1; mask < items.size(); ++mask) {
      const std::size_t low = static_cast<std::size_t>(std::countr_zero(mask));
      items[mask].sum = items[mask & (mask - 1)].sum + xs_[first + low];
      items[mask].mask = static_cast<std::uint64_t>(mask) << first;
    }
    std::sort(items.begin(), items.end(), [](const Entry& x, const Entry& y) {
      return x.sum != y.sum ? x.sum < y.sum : x.mask < y.mask;
    });
  }
}

SolveOutcome RsspMitmSolver::solve(double z, double epsilon) const {
  require_epsilon(epsilon);
  if (!std::isfinite(z)) throw ParameterError("target is not finite");
  const VectorSet vs = VectorSet::scalars(xs_);
  const double target[1] = {z};
  const double lo = z - epsilon - kReassociationSlack;
  const double hi = z + epsilon + kReassociationSlack;

  // Quick pass: pin one sum from each of the last two quarters so that the
  // rest of the target sits near the middle of the first two, then scan
  // those two tables with two pointers.
  const auto& qa = quarters_[0];
  const auto& qb = quarters_[1];
  const auto& qc = quarters_[2];
  const auto& qd = quarters_[3];
  const double least = qa.front().sum + qb.front().sum + qc.front().sum + qd.front().sum;
  const double most = qa.back().sum + qb.back().sum + qc.back().sum + qd.back().sum;
  if (hi < least - kReassociationSlack || lo > most + kReassociationSlack) {
    return finish(std::nullopt, epsilon, /*exact=*/true);
  }
  const double centre = qa[qa.size() / 2].sum + qb[qb.size() / 2].sum;
  const std::size_t attempts = std::min<std::size_t>(kQuickAttempts, qc.size());
  for (std::size_t r = 0; r < attempts; ++r) {
    const std::size_t mid = qc.size() / 2;
    const std::size_t ci = r % 2 ? mid - std::min(mid, (r + 1) / 2)
                                 : std::min(qc.size() - 1, mid + r / 2);
    const Entry& c = qc[ci];
    const double want = z - centre - c.sum;
    auto it = std::lower_bound(qd.begin(), qd.end(), want,
                               [](const Entry& e, double v) { return e.sum < v; });
    if (it == qd.end() || (it != qd.begin() && want - (it - 1)->sum < it->sum - want)) --it;
    const Entry& d = *it;
    const double rest_lo = lo - c.sum - d.sum;
    const double rest_hi = hi - c.sum - d.sum;
    std::size_t i = 0;
    std::size_t j = qb.size();
    while (i < qa.size() && j > 0) {
      const double s = qa[i].sum + qb[j - 1].sum;
      if (s > rest_hi) {
        --j;
      } else if (s < rest_lo) {
        ++i;
      } else {
        SubsetSolution cand = evaluate_subset(
            vs, mask_indices(qa[i].mask | qb[j - 1].mask | c.mask | d.mask), target);
        if (cand.residual_inf <= epsilon) {
          return finish(std::move(cand), epsilon, /*exact=*/true);
        }
        if (cand.achieved[0] > z) {
          --j;
        } else {
          ++i;
        }
      }
    }
  }

  PairStream low(quarters_[0], quarters_[1], /*descending=*/false);
  PairStream high(quarters_[2], quarters_[3], /*descending=*/true);
  auto a = low.next();
  auto b = high.next();
  while (a && b) {
    const double s = a->sum + b->sum;
    if (s > hi) {
      b = high.next();
    } else if (s < lo) {
      a = low.next();
    } else {
      SubsetSolution cand = evaluate_subset(vs, mask_indices(a->mask | b->mask), target);
      if (cand.residual_inf <= epsilon) {
        return finish(std::move(cand), epsilon, /*exact=*/true);
      }
      if (cand.achieved[0] > z) {
        b = high.next();
      } else {
        a = low.next();
      }
    }
  }
  return finish(std::nullopt, epsilon, /*exact=*/true);
}

VectorSet::VectorSet(std::span<const double> values, std::size_t count,
                     std::size_t dim)
    : values_(values), count_(count), dim_(dim) {
  if (dim == 0) throw ShapeError("vector dimension must be positive");
  if (values.size() != count * dim) {
    throw ShapeError("vector set data length does not match count x dim");
  }
}

VectorSet VectorSet::of(const NsnEnsemble& ensemble) {
  return VectorSet(ensemble.vectors, ensemble.count, ensemble.dim);
}

VectorSet VectorSet::scalars(std::span<const double> xs) {
  return VectorSet(xs, xs.size(), 1);
}

VectorSet VectorSet::slice(std::size_t first, std::size_t n) const {
  if (first + n > count_) throw ShapeError("vector set slice out of range");
  return VectorSet(values_.subspan(first * dim_, n * dim_), n, dim_);
}

SubsetSolution evaluate_subset(const VectorSet& vs,
                               std::vector<std::size_t> indices,
                               std::span<const double> target) {
  std::sort(indices.begin(), indices.end());
  SubsetSolution out;
  out.achieved.assign(vs.dim(), 0.0);
  for (std::size_t i : indices) {
    if (i >= vs.count()) throw ParameterError("subset index out of range");
    const auto row = vs.row(i);
    for (std::size_t c = 0; c < vs.dim(); ++c) out.achieved[c] += row[c];
  }
  out.residual_inf = residual_inf(out.achieved, target);
  out.indices = std::move(indices);
  return out;
}

bool lex_less(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::string strategy_name(const SolverStrategy& strategy) {
  switch (strategy.index()) {
    case 0: return "enum";
    case 1: return "mitm";
    default: return "greedy";
  }
}

SolverStrategy parse_strategy(const std::string& name) {
  if (name == "enum" || name == "exhaustive") return ExhaustiveEnum{};
  if (name == "mitm" || name == "meet-in-the-middle") return MeetInTheMiddle{};
  if (name == "greedy" || name == "greedy-swap") return GreedySwap{};
  throw ParameterError("unknown solver strategy '" + name + "'");
}

std::string status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Found: return "found";
    case SolveStatus::NotFound: return "not-found";
    case SolveStatus::ProvenInfeasible: return "proven-infeasible";
  }
  return "unknown";
}

double c_d(std::size_t dim) {
  const double d = static_cast<double>(dim);
  return std::min(1.0 / (d * d), 1.0 / 16.0);
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::size_t i = 0; i < k; ++i) {
    acc = acc * (n - i) / (i + 1);
    if (acc > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(acc);
}

std::uint64_t family_size(std::size_t n, std::size_t k, CardinalityMode mode) {
  if (mode == CardinalityMode::Exact) return binomial(n, k);
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t total = 0;
  for (std::size_t j = 0; j <= std::min(k, n); ++j) {
    const std::uint64_t term = binomial(n, j);
    if (term == kMax || total > kMax - term) return kMax;
    total += term;
  }
  return total;
}

SolveOutcome solve_rssp_1d(std::span<const double> xs, double z, double epsilon,
                           const SolverStrategy& strategy,
                           std::size_t enumeration_budget) {
  require_epsilon(epsilon);
  if (!std::isfinite(z)) throw ParameterError("target is not finite");
  for (double x : xs) {
    if (!std::isfinite(x)) throw ParameterError("value is not finite");
  }
  if (std::holds_alternative<MeetInTheMiddle>(strategy)) {
    return RsspMitmSolver(xs).solve(z, epsilon);
  }
  if (std::holds_alternative<ExhaustiveEnum>(strategy)) {
    const VectorSet vs = VectorSet::scalars(xs);
    const double target[1] = {z};
    return solve_exhaustive(vs, target, epsilon, xs.size(),
                            CardinalityMode::AtMost, enumeration_budget);
  }
  throw ParameterError("solve_rssp_1d supports enum and mitm strategies only");
}

SolveOutcome solve_mrss(const VectorSet& vs, std::span<const double> target,
                        const SolverParams& params) {
  require_epsilon(params.epsilon);
  require_target(vs, target);
  const std::size_t k = effective_k(vs, params);
  return std::visit(
      [&](const auto& s) -> SolveOutcome {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ExhaustiveEnum>) {
          return solve_exhaustive(vs, target, params.epsilon, k, params.mode,
                                  params.enumeration_budget);
        } else if constexpr (std::is_same_v<S, MeetInTheMiddle>) {
          return solve_mitm(vs, target, params.epsilon, k, params.mode,
                            params.enumeration_budget);
        } else {
          return solve_greedy(vs, target, params.epsilon, k, params.mode, s,
                              params.seed);
        }
      },
      params.strategy);
}

std::uint64_t subset_sum_number(const VectorSet& vs,
                                std::span<const double> target, std::size_t k,
                                double epsilon, std::size_t enumeration_budget) {
  require_epsilon(epsilon);
  require_target(vs, target);
  if (k > vs.count()) return 0;
  const std::uint64_t family = binomial(vs.count(), k);
  if (family > enumeration_budget) {
    throw BudgetError("subset-sum number needs " + std::to_string(family) +
                      " subsets, budget is " + std::to_string(enumeration_budget));
  }
  std::uint64_t count = 0;
  walk_subsets(vs, k, CardinalityMode::Exact,
               [&](std::span<const std::size_t>, std::span<const double> sum) {
                 if (residual_inf(sum, target) <= epsilon) ++count;
               });
  return count;
}

std::vector<BoostResult> partition_boost(
    const VectorSet& vs, const std::vector<std::vector<double>>& targets,
    std::size_t group_size, const SolverParams& params) {
  if (group_size < params.k * params.k) {
    throw ParameterError("partition_boost: group_size must be at least k^2");
  }
  if (group_size == 0 || vs.count() < group_size) {
    throw ParameterError("partition_boost: need n >= group_size >= 1");
  }
  const std::size_t groups = vs.count() / group_size;
  std::vector<BoostResult> results;
  results.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    BoostResult result;
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t first = g * group_size;
      const std::size_t size =
          g + 1 == groups ? vs.count() - first : group_size;
      SolverParams group_params = params;
      group_params.seed = derive_stream(params.seed, hash_label("group"), g);
      const SolveOutcome outcome =
          solve_mrss(vs.slice(first, size), targets[t], group_params);
      result.attempts.push_back({g, first, size, outcome.status});
      if (outcome.found()) {
        std::vector<std::size_t> global = outcome.solution->indices;
        for (std::size_t& i : global) i += first;
        result.solution = evaluate_subset(vs, std::move(global), targets[t]);
        break;
      }
    }
    results.push_back(std::move(result));
  }
  return results;
}

namespace {

void summarize(CoverReport& report) {
  report.all_hit = true;
  report.min_residual = kNaN;
  report.max_residual = kNaN;
  for (std::size_t i = 0; i < report.hit.size(); ++i) {
    if (!report.hit[i]) {
      report.all_hit = false;
      continue;
    }
    const double r = report.residual[i];
    if (std::isnan(report.min_residual) || r < report.min_residual) report.min_residual = r;
    if (std::isnan(report.max_residual) || r > report.max_residual) report.max_residual = r;
  }
}

void record(CoverReport& report, const SolveOutcome& outcome) {
  report.hit.push_back(outcome.found());
  report.status.push_back(outcome.status);
  report.residual.push_back(outcome.best ? outcome.best->residual_inf : kNaN);
}

}  // namespace

CoverReport cover_targets_1d(std::span<const double> xs,
                             std::span<const double> grid, double epsilon,
                             const SolverStrategy& strategy) {
  CoverReport report;
  if (std::holds_alternative<MeetInTheMiddle>(strategy)) {
    const RsspMitmSolver solver(xs);
    for (double z : grid) record(report, solver.solve(z, epsilon));
  } else {
    for (double z : grid) record(report, solve_rssp_1d(xs, z, epsilon, strategy));
  }
  summarize(report);
  return report;
}

CoverReport cover_targets(const VectorSet& vs,
                          const std::vector<std::vector<double>>& grid,
                          const SolverParams& params) {
  CoverReport report;
  for (const auto& z : grid) record(report, solve_mrss(vs, z, params));
  summarize(report);
  return report;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t grid_size) {
  if (grid_size == 0) throw ParameterError("grid_size must be positive");
  if (grid_size == 1) return {0.5 * (lo + hi)};
  std::vector<double> grid(grid_size);
  const double step = (hi - lo) / static_cast<double>(grid_size - 1);
  for (std::size_t i = 0; i < grid_size; ++i) {
    grid[i] = lo + step * static_cast<double>(i);
  }
  grid.back() = hi;
  return grid;
}

}  // namespace slth
