#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "slth/error.hpp"
#include "slth/random.hpp"

using namespace slth;

namespace {

struct Moments {
  double mean = 0, var = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  return m;
}

}  // namespace

TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                   {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                   {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are deterministic and distinct") {
  RandomStream a({42, 1}), b({42, 1}), c({42, 2}), d({43, 1});
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    differs_c |= x != c.next_u64();
    differs_d |= x != d.next_u64();
  }
  CHECK(differs_c);
  CHECK(differs_d);
  CHECK(derive_stream({1, 2}, 3, 4) == derive_stream({1, 2}, 3, 4));
  CHECK(!(derive_stream({1, 2}, 3, 4) == derive_stream({1, 2}, 3, 5)));
  CHECK(hash_label("a") != hash_label("b"));
}

TEST_CASE("uniform and below stay in range") {
  RandomStream r({7, 7});
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(r.below(13) < 13);
  }
  CHECK_THROWS_AS(r.below(0), ParameterError);
}

TEST_CASE("normal tensor is deterministic") {
  CHECK(sample_normal_tensor({2, 3, 4, 5}, {9, 9}) == sample_normal_tensor({2, 3, 4, 5}, {9, 9}));
  CHECK_THROWS_AS(sample_normal_tensor({0, 1, 1, 1}, {1, 1}), ShapeError);
}

TEST_CASE("normal tensor moments over 10^6 entries") {
  const Tensor4 t = sample_normal_tensor({10, 10, 100, 100}, {2024, 0});
  const std::vector<double> v(t.values().begin(), t.values().end());
  const Moments m = moments(v);
  const double n = static_cast<double>(v.size());
  CHECK(std::abs(m.mean) <= 0.01);
  CHECK(std::abs(m.mean) <= 3.0 / std::sqrt(n));
  CHECK(std::abs(m.var - 1.0) <= 0.01);
  const double pos = static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) {
                       return x > 0.0;
                     })) / n;
  CHECK(std::abs(pos - 0.5) <= 0.002);
}

TEST_CASE("NSN product identity and shared scalar") {
  const NsnEnsemble e = sample_nsn(50, 4, {3, 3});
  REQUIRE(e.vectors.size() == 200);
  for (std::size_t i = 0; i < e.count; ++i) {
    for (std::size_t j = 0; j < e.dim; ++j) {
      CHECK(e.vector(i, j) == e.scalars[i] * e.directions[i * 4 + j]);
      CHECK(e.vector(i, j) / e.directions[i * 4 + j] == doctest::Approx(e.scalars[i]));
    }
  }
}

TEST_CASE("NSN draws are nested across n") {
  const NsnEnsemble small = sample_nsn(10, 3, {8, 1});
  const NsnEnsemble big = sample_nsn(25, 3, {8, 1});
  CHECK(std::equal(small.vectors.begin(), small.vectors.end(), big.vectors.begin()));
  CHECK(std::equal(small.scalars.begin(), small.scalars.end(), big.scalars.begin()));
}

TEST_CASE("NSN d=1 moments: E[Y] = 0, E|Y| = 2/pi") {
  const std::size_t n = 1'000'000;
  const NsnEnsemble e = sample_nsn(n, 1, {11, 0});
  std::vector<double> abs_y(n);
  for (std::size_t i = 0; i < n; ++i) abs_y[i] = std::abs(e.vectors[i]);
  const Moments y = moments(e.vectors);
  const Moments a = moments(abs_y);
  const double nn = static_cast<double>(n);
  CHECK(std::abs(y.mean) <= 3.0 * std::sqrt(y.var / nn));
  CHECK(std::abs(a.mean - 2.0 / std::numbers::pi) <= 3.0 * std::sqrt(a.var / nn));
}

TEST_CASE("NSN vectors are uncorrelated across draws") {
  const std::size_t trials = 200'000;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const NsnEnsemble e = sample_nsn(2, 1, derive_stream({12, 0}, 1, t));
    const double x = e.vectors[0], y = e.vectors[1];
    sx += x;
    sy += y;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const double n = static_cast<double>(trials);
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(n));
}

TEST_CASE("half-normal draws") {
  const std::size_t n = 1'000'000;
  const std::vector<double> h = sample_half_normal(n, {13, 0});
  CHECK(std::all_of(h.begin(), h.end(), [](double x) { return x >= 0.0; }));
  const Moments m = moments(h);
  CHECK(std::abs(m.mean - std::sqrt(2.0 / std::numbers::pi)) <=
        3.0 * std::sqrt(m.var / static_cast<double>(n)));
}

TEST_CASE("half-normal times a signed normal matches NSN in |Y| histogram") {
  const std::size_t n = 400'000;
  const std::vector<double> h = sample_half_normal(n, {14, 0});
  RandomStream g({14, 1});
  const NsnEnsemble e = sample_nsn(n, 1, {14, 2});
  const std::vector<double> edges{0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
  for (double edge : edges) {
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a += std::abs(h[i] * g.normal()) <= edge;
      b += std::abs(e.vectors[i]) <= edge;
    }
    const double pa = static_cast<double>(a) / n, pb = static_cast<double>(b) / n;
    const double se = std::sqrt(pa * (1 - pa) / n + pb * (1 - pb) / n);
    CHECK(std::abs(pa - pb) <= 4.0 * se + 1e-12);
  }
}
