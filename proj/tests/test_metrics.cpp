#include "doctest.h"

#include <cmath>

#include "carotid3d/metrics.hpp"
#include "support.hpp"

using namespace carotid;
using doctest::Approx;

TEST_CASE("dice examples") {
  Mask a(4, 4), b(4, 4);
  CHECK(dsc(a, b) == 1.0);
  a(0, 0) = a(1, 0) = 1;
  CHECK(dsc(a, b) == 0.0);
  b(1, 0) = b(2, 0) = 1;
  CHECK(dsc(a, b) == Approx(0.5));
  CHECK(dsc(a, a) == 1.0);
  CHECK_THROWS_AS(dsc(a, Mask(3, 4)), InvalidArgument);
}

TEST_CASE("dice and hd95 match brute force on random masks") {
  Rng rng(91);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 2 + int(15 * rng.uniform());
    const int h = 2 + int(15 * rng.uniform());
    Mask a = test::random_mask(rng, w, h, 0.1 + 0.6 * rng.uniform());
    Mask b = test::random_mask(rng, w, h, 0.1 + 0.6 * rng.uniform());
    a(0, 0) = 1;
    b(w - 1, h - 1) = 1;
    REQUIRE(dsc(a, b) == test::brute_force_dsc(a, b));

    const auto pa = boundary_points(a);
    const auto pb = boundary_points(b);
    const auto oa = test::brute_force_boundary(a);
    const auto ob = test::brute_force_boundary(b);
    REQUIRE(pa == oa);
    REQUIRE(pb == ob);
    const double h95 = hd95(pa, pb);
    REQUIRE(h95 == test::brute_force_hd95(oa, ob));
    REQUIRE(hausdorff(pa, pb) == test::brute_force_hausdorff(oa, ob));
    REQUIRE(h95 <= hausdorff(pa, pb));
  }
}

TEST_CASE("jaccard relation") {
  Rng rng(92);
  for (int trial = 0; trial < 50; ++trial) {
    const Mask a = test::random_mask(rng, 10, 10, 0.5);
    const Mask b = test::random_mask(rng, 10, 10, 0.5);
    long both = 0, either = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      both += a.data()[i] && b.data()[i];
      either += a.data()[i] || b.data()[i];
    }
    const double j = double(both) / double(either);
    CHECK(dsc(a, b) == Approx(2 * j / (1 + j)));
  }
}

TEST_CASE("boundary spacing and hausdorff examples") {
  Mask m(5, 5);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x) m(x, y) = 1;
  const auto b = boundary_points(m, 0.5);
  CHECK(b.size() == 8);
  for (const auto& p : b) CHECK(p != Point2(1.0, 1.0));

  const std::vector<Point2> a{{0, 0}, {1, 0}};
  const std::vector<Point2> c{{0, 0}, {4, 0}};
  CHECK(hausdorff(a, c) == 3.0);
  CHECK(hd95(a, a) == 0.0);
  CHECK_THROWS_AS(hd95(a, std::vector<Point2>{}), InvalidArgument);
}

TEST_CASE("percentile") {
  CHECK(percentile({3, 1, 2}, 50) == 2.0);
  CHECK(percentile({0, 10}, 95) == Approx(9.5));
  CHECK(percentile({7}, 95) == 7.0);
  CHECK_THROWS_AS(percentile({}, 50), InvalidArgument);
  CHECK_THROWS_AS(percentile({1}, 101), InvalidArgument);
}

TEST_CASE("classification rates for the scan table") {
  const auto r = classification_rates({25, 10, 10, 57});
  CHECK(std::abs(r.sensitivity - 0.714) <= 0.001);
  CHECK(std::abs(r.specificity - 0.851) <= 0.001);
  CHECK(std::abs(r.accuracy - 0.804) <= 0.001);
  CHECK(r.sensitivity == 25.0 / 35.0);
  CHECK_THROWS_AS(classification_rates({-1, 1, 1, 1}), InvalidArgument);
  CHECK_THROWS_AS(classification_rates({0, 0, 3, 4}), InvalidArgument);
}

TEST_CASE("mean absolute difference") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 2, 1, 4};
  const auto d = mad(a, b);
  CHECK(d.mad == Approx(0.75));
  // |diff| = 1, 0, 2, 0; population variance = (0.0625 + 0.5625 + 1.5625 + 0.5625) / 4
  CHECK(d.sd == Approx(std::sqrt(2.75 / 4)));
  CHECK_THROWS_AS(mad(a, std::vector<double>{1}), InvalidArgument);
}

TEST_CASE("pearson") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 5, 4, 5};
  // Hand: mean a 3, mean b 4; sxy = 6, sxx = 10, syy = 6.
  CHECK(pearson(a, b) == Approx(6.0 / std::sqrt(60.0)));
  CHECK(pearson(a, a) == Approx(1.0));

  Rng rng(93);
  std::vector<double> x(30), y(30), xs(30), ys(30);
  for (int i = 0; i < 30; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] + rng.normal();
    xs[i] = 3 * x[i] + 7;
    ys[i] = -2 * y[i] + 1;
  }
  const double r = pearson(x, y);
  CHECK(std::abs(r) <= 1.0);
  CHECK(pearson(xs, y) == Approx(r).epsilon(1e-12));
  CHECK(pearson(x, ys) == Approx(-r).epsilon(1e-12));
  CHECK(pearson(y, x) == Approx(r).epsilon(1e-12));

  CHECK_THROWS_AS(pearson(a, std::vector<double>(5, 1.0)), DomainError);
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), InvalidArgument);
}
