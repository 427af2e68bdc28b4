#include <doctest.h>

#include <cmath>

#include "inspire/distance_tree.hpp"
#include "inspire/rng.hpp"
#include "phantom.hpp"

using namespace inspire;

namespace {

// Exhaustive nearest-spel distance to the alpha cut, saturated at d_max.
// Uses the same per-spel arithmetic as the tree's leaf update so results are
// comparable bit for bit.
double oracle_distance(const FuzzyImage& img, const Vec& p, double alpha, double d_max) {
  double best = d_max;
  const int64_t count = img.domain.spel_count();
  for (int64_t i = 0; i < count; ++i) {
    if (img.membership[static_cast<size_t>(i)] < alpha) continue;
    best = std::min(best, (p - img.domain.physical(img.domain.coords(i))).norm());
  }
  return best;
}

std::vector<Vec> random_points(const GridDomain& d, RandomStream& rng, int count) {
  std::vector<Vec> pts;
  for (int i = 0; i < count; ++i) {
    Vec p(d.dims());
    for (int k = 0; k < d.dims(); ++k)
      p[k] = rng.next_double() * d.spacing[k] * static_cast<double>(d.sizes[k] - 1);
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST_CASE("tree construction examples") {
  FuzzyImage one(GridDomain(VecI(1, 1), Vec(1.0, 1.0)));
  one.membership = {0.4};
  const DistanceTree t1 = DistanceTree::build(one);
  CHECK(t1.table().size() == 2);
  CHECK(t1.table()[1] == 0.4);

  FuzzyImage sq(GridDomain(VecI(2, 2), Vec(1.0, 1.0)));
  sq.membership = {0.1, 0.9, 0.3, 0.2};
  const DistanceTree t2 = DistanceTree::build(sq);
  CHECK(t2.root_value() == 0.9);
  CHECK(t2.table()[1] == std::max(t2.table()[2], t2.table()[3]));
  CHECK(t2.table()[2] == std::max(t2.table()[4], t2.table()[5]));
  CHECK(t2.table()[3] == std::max(t2.table()[6], t2.table()[7]));

  const FuzzyImage rnd = testing::random_fuzzy_image(VecI(13, 9), 2);
  const DistanceTree t3 = DistanceTree::build(rnd);
  CHECK(t3.root_value() ==
        *std::max_element(rnd.membership.begin(), rnd.membership.end()));
}

TEST_CASE("ancestor table invariant on power-of-two grids") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(16, 16), 31);
  const DistanceTree t = DistanceTree::build(img);
  REQUIRE(t.table().size() == 512);
  for (size_t i = 1; i < 256; ++i)
    CHECK(t.table()[i] == std::max(t.table()[2 * i], t.table()[2 * i + 1]));
}

TEST_CASE("memory cap") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(64, 64), 1);
  CHECK_THROWS_AS(DistanceTree::build(img, 1024), std::length_error);
}

TEST_CASE("split rect") {
  const Vec unit(1.0, 1.0);
  RectSplit sp = split_rect(VecI(0, 0), VecI(4, 2), unit);
  CHECK(sp.axis == 0);
  CHECK(sp.R1 == VecI(2, 2));
  CHECK(sp.R2 == VecI(2, 2));
  CHECK(sp.y2 == VecI(2, 0));

  sp = split_rect(VecI(0, 0), VecI(2, 2), Vec(1.0, 3.0));
  CHECK(sp.axis == 1);

  sp = split_rect(VecI(0, 0), VecI(3, 1), unit);
  CHECK(sp.R1 == VecI(2, 1));
  CHECK(sp.R2 == VecI(1, 1));

  CHECK_THROWS_AS(split_rect(VecI(0, 0), VecI(1, 1), unit), std::invalid_argument);
}

TEST_CASE("rectangle lower bounds") {
  const Vec unit(1.0, 1.0);
  CHECK(rect_lower_bound(Vec(1.5, 0.5), VecI(0, 0), VecI(3, 3), unit) == 0.0);
  CHECK(rect_lower_bound(Vec(0.0, 0.0), VecI(3, 4), VecI(1, 1), unit) == 5.0);
  CHECK(rect_lower_bound(Vec(5.0, 0.0), VecI(0, 0), VecI(3, 1), Vec(2.0, 1.0)) == 1.0);

  // beta = 1 reduces to the plain bound.
  RandomStream rng(7);
  for (int i = 0; i < 50; ++i) {
    const Vec x(rng.next_double(-5.0, 15.0), rng.next_double(-5.0, 15.0));
    const double d = rect_lower_bound(x, VecI(2, 3), VecI(4, 2), unit);
    CHECK(relaxed_lower_bound(x, VecI(2, 3), VecI(4, 2), unit, 3.0, 1.0) == d);
    CHECK(relaxed_lower_bound(x, VecI(2, 3), VecI(4, 2), unit, 3.0, 1.5) >= d);
    if (d <= 3.0)
      CHECK(relaxed_lower_bound(x, VecI(2, 3), VecI(4, 2), unit, 3.0, 1.5) == d);
  }

  // d_R = 30, d_t = 20, beta = 1.2 -> 1.2 * 10 + 20 = 32.
  CHECK(relaxed_lower_bound(Vec(32.0, 4.0), VecI(0, 0), VecI(3, 9), unit, 20.0, 1.2) ==
        doctest::Approx(32.0));
}

TEST_CASE("exact search equals the linear-scan oracle") {
  RandomStream rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const VecI sizes(5 + static_cast<int64_t>(rng.next_below(12)),
                     5 + static_cast<int64_t>(rng.next_below(12)));
    const FuzzyImage img = testing::random_fuzzy_image(sizes, 1000 + trial);
    const DistanceTree tree = DistanceTree::build(img);
    const double d_max = 9.0;

    const std::vector<Vec> pts = random_points(img.domain, rng, 4);
    std::vector<double> levels;
    for (int j = 0; j < 5; ++j) levels.push_back(1.0 - rng.next_double());
    std::vector<double> D(levels.size() * pts.size(), d_max);
    tree.search(pts, levels, D, 20.0, 1.0);

    for (size_t a = 0; a < levels.size(); ++a)
      for (size_t j = 0; j < pts.size(); ++j)
        CHECK(D[a * pts.size() + j] == oracle_distance(img, pts[j], levels[a], d_max));
  }
}

TEST_CASE("exact search on a 3D image") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(4, 5, 6), 9);
  const DistanceTree tree = DistanceTree::build(img);
  RandomStream rng(19);
  const std::vector<Vec> pts = random_points(img.domain, rng, 8);
  const std::vector<double> levels{0.15, 0.5, 0.95};
  const double d_max = 6.0;
  std::vector<double> D(levels.size() * pts.size(), d_max);
  tree.search(pts, levels, D, 20.0, 1.0);
  for (size_t a = 0; a < levels.size(); ++a)
    for (size_t j = 0; j < pts.size(); ++j)
      CHECK(D[a * pts.size() + j] == oracle_distance(img, pts[j], levels[a], d_max));
}

TEST_CASE("relaxed search never underestimates and is exact below d_t") {
  RandomStream rng(303);
  for (int trial = 0; trial < 40; ++trial) {
    FuzzyImage img = testing::random_fuzzy_image(VecI(16, 16), 4000 + trial);
    // Sparsify so some cut distances exceed d_t.
    for (double& m : img.membership)
      if (rng.next_double() < 0.95) m = 0.0;
    const DistanceTree tree = DistanceTree::build(img);
    const double d_max = 40.0, d_t = 4.0, beta = 1.2;

    const std::vector<Vec> pts = random_points(img.domain, rng, 4);
    const std::vector<double> levels{0.2, 0.6};
    std::vector<double> D(levels.size() * pts.size(), d_max);
    tree.search(pts, levels, D, d_t, beta);
    for (size_t a = 0; a < levels.size(); ++a)
      for (size_t j = 0; j < pts.size(); ++j) {
        const double exact = oracle_distance(img, pts[j], levels[a], d_max);
        CHECK(D[a * pts.size() + j] >= exact);
        if (exact <= d_t) CHECK(D[a * pts.size() + j] == exact);
      }
  }
}

TEST_CASE("empty cut leaves distances saturated") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(8, 8), 3);
  const DistanceTree tree = DistanceTree::build(img);
  const std::vector<Vec> pts{Vec(3.0, 3.0)};
  const std::vector<double> levels{tree.root_value() + 0.01};
  std::vector<double> D(1, 7.0);
  tree.search(pts, levels, D, 20.0, 1.0);
  CHECK(D[0] == 7.0);
}

TEST_CASE("monte carlo estimate on crisp images") {
  FuzzyImage img(GridDomain(VecI(9, 9), Vec(1.0, 1.0)));
  img.at(VecI(1, 1)) = 1.0;
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  SearchParams params;
  params.d_max = 20.0;
  params.beta = 1.0;
  params.n_alpha = 16;

  // A point inside its own cut has distance 0.
  const DistanceSample inside =
      mc_distance_gradient({Vec(1.0, 1.0), 1.0}, tree, ctree, params);
  CHECK(inside.inside);
  CHECK(inside.value == 0.0);

  // Query outside the grid support.
  const DistanceSample off = mc_distance_gradient({Vec(-1.0, 0.0), 1.0}, tree, ctree, params);
  CHECK_FALSE(off.inside);
  CHECK(off.value == 0.0);
}

TEST_CASE("distance and unit gradient against a thin crisp structure") {
  // A full vertical object line keeps the distance field exactly linear, so
  // the interpolated value and gradient carry no interpolation error.
  FuzzyImage img(GridDomain(VecI(12, 12), Vec(1.0, 1.0)));
  for (int64_t y = 0; y < 12; ++y) img.at(VecI(0, y)) = 1.0;
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  SearchParams params;
  params.d_max = 20.0;
  params.beta = 1.0;
  params.n_alpha = 8;

  const DistanceSample s = mc_distance_gradient({Vec(3.0, 5.0), 1.0}, tree, ctree, params);
  REQUIRE(s.inside);
  CHECK(s.value == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(s.gradient.norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.gradient[0] == doctest::Approx(1.0).epsilon(1e-6));  // away from the object
  CHECK(s.gradient[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("estimate is non-increasing in the fuzzy height at an object spel") {
  FuzzyImage img(GridDomain(VecI(9, 9), Vec(1.0, 1.0)));
  img.at(VecI(4, 4)) = 1.0;
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  SearchParams params;
  params.d_max = 20.0;
  params.beta = 1.0;
  params.n_alpha = 64;
  params.alpha_seed = 0.123;

  double prev = params.d_max;
  for (double h : {0.2, 0.5, 0.8, 1.0}) {
    const DistanceSample s = mc_distance_gradient({Vec(4.0, 4.0), h}, tree, ctree, params);
    CHECK(s.value <= prev);
    prev = s.value;
  }
  CHECK(prev == 0.0);
}

TEST_CASE("spatial gradient matches finite differences of the estimate") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(16, 16), 8);
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  SearchParams params;
  params.d_max = 10.0;
  params.d_t = 10.0;
  params.beta = 1.0;
  params.n_alpha = 16;
  params.alpha_seed = 0.77;

  RandomStream rng(808);
  const double h = 1e-4;
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 15; ++trial) {
    // Generic points: stay clear of cell faces so the FD stays in-cell.
    Vec p(2.0 + 0.2 + rng.next_double() * 0.6 + static_cast<double>(rng.next_below(11)),
          2.0 + 0.2 + rng.next_double() * 0.6 + static_cast<double>(rng.next_below(11)));
    if (p[0] > 13.0 || p[1] > 13.0) continue;
    const double height = rng.next_double();
    const DistanceSample s = mc_distance_gradient({p, height}, tree, ctree, params);
    REQUIRE(s.inside);
    for (int k = 0; k < 2; ++k) {
      Vec lo = p, hi = p;
      lo[k] -= h;
      hi[k] += h;
      const double flo = mc_distance_gradient({lo, height}, tree, ctree, params).value;
      const double fhi = mc_distance_gradient({hi, height}, tree, ctree, params).value;
      CHECK(std::abs((fhi - flo) / (2.0 * h) - s.gradient[k]) <= 1e-3);
    }
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("estimator is deterministic per alpha seed") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(10, 10), 6);
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  SearchParams params;
  params.d_max = 8.0;
  params.d_t = 8.0;
  params.alpha_seed = 0.456;

  const FuzzyPoint p{Vec(4.3, 6.1), 0.62};
  const DistanceSample a = mc_distance_gradient(p, tree, ctree, params);
  const DistanceSample b = mc_distance_gradient(p, tree, ctree, params);
  CHECK(a.value == b.value);
  CHECK(a.gradient == b.gradient);
}

TEST_CASE("estimator variance decays like 1/n_alpha") {
  const FuzzyImage img = testing::random_fuzzy_image(VecI(8, 8), 12);
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  const FuzzyPoint p{Vec(3.4, 4.6), 0.55};

  std::vector<double> log_n, log_var;
  RandomStream seeds(2024);
  for (int n_alpha : {8, 32, 128, 512}) {
    SearchParams params;
    params.d_max = 10.0;
    params.d_t = 10.0;
    params.beta = 1.0;
    params.n_alpha = n_alpha;

    double sum = 0.0, sum_sq = 0.0;
    const int reps = 300;
    for (int r = 0; r < reps; ++r) {
      params.alpha_seed = seeds.next_double();
      const double v = mc_distance_gradient(p, tree, ctree, params).value;
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / reps;
    const double var = sum_sq / reps - mean * mean;
    log_n.push_back(std::log(static_cast<double>(n_alpha)));
    log_var.push_back(std::log(var));
  }

  // Least-squares slope of log variance vs log n_alpha.
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < log_n.size(); ++i) {
    mx += log_n[i];
    my += log_var[i];
  }
  mx /= static_cast<double>(log_n.size());
  my /= static_cast<double>(log_n.size());
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < log_n.size(); ++i) {
    sxy += (log_n[i] - mx) * (log_var[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.2));
}
