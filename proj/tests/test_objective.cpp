#include <doctest.h>

#include <cmath>

#include "inspire/objective.hpp"
#include "inspire/rng.hpp"
#include "phantom.hpp"

using namespace inspire;

namespace {

struct Problem {
  FuzzyImage img_a, img_b;
  DistanceTree tree_a, ctree_a, tree_b, ctree_b;
  ObjectiveContext ctx;

  Problem(FuzzyImage a, FuzzyImage b, double lambda)
      : img_a(std::move(a)),
        img_b(std::move(b)),
        tree_a(DistanceTree::build(img_a)),
        ctree_a(DistanceTree::build(img_a.complement())),
        tree_b(DistanceTree::build(img_b)),
        ctree_b(DistanceTree::build(img_b.complement())) {
    ctx.img_a = &img_a;
    ctx.img_b = &img_b;
    ctx.tree_a = &tree_a;
    ctx.ctree_a = &ctree_a;
    ctx.tree_b = &tree_b;
    ctx.ctree_b = &ctree_b;
    ctx.weights_a = WeightMap::uniform(img_a.domain);
    ctx.weights_b = WeightMap::uniform(img_b.domain);
    ctx.mask_a = MaskRegion::full_domain(img_a.domain);
    ctx.mask_b = MaskRegion::full_domain(img_b.domain);
    ctx.lambda = lambda;
    ctx.search_ab.d_max = 10.0;
    ctx.search_ab.d_t = 10.0;
    ctx.search_ab.beta = 1.0;
    ctx.search_ab.n_alpha = 7;
    ctx.search_ba = ctx.search_ab;
  }
};

TransformPair zero_pair(const GridDomain& da, const GridDomain& db, int64_t cp) {
  TransformPair pair;
  pair.forward = BSplineField(VecI(cp, cp), Vec(da.dims()), da.extent());
  pair.backward = BSplineField(VecI(cp, cp), Vec(db.dims()), db.extent());
  return pair;
}

std::vector<ObjectiveSample> grid_samples(const GridDomain& d, uint64_t seed, int count,
                                          double weight = 1.0) {
  RandomStream rng(seed);
  std::vector<ObjectiveSample> out;
  for (int i = 0; i < count; ++i) {
    ObjectiveSample s;
    s.point = VecI(d.dims());
    for (int k = 0; k < d.dims(); ++k)
      s.point[k] = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(d.sizes[k])));
    s.weight = weight;
    s.alpha_seed = rng.next_double();
    out.push_back(s);
  }
  return out;
}

void perturb(BSplineField& field, uint64_t seed, double scale) {
  RandomStream rng(seed);
  for (double& p : field.parameters()) p = rng.next_double(-scale, scale);
}

}  // namespace

TEST_CASE("inverse inconsistency examples") {
  const GridDomain d(VecI(11, 11), Vec(1.0, 1.0));
  TransformPair pair = zero_pair(d, d, 4);
  CHECK(iic(pair, Vec(4.0, 5.0)) == 0.0);

  // Constant shift +v forward, -v backward: exact inverses.
  TransformPair shifts = pair;
  for (int64_t i = 0; i < shifts.forward.parameter_count(); i += 2) {
    shifts.forward.parameters()[static_cast<size_t>(i)] = 3.0;
    shifts.forward.parameters()[static_cast<size_t>(i + 1)] = 4.0;
    shifts.backward.parameters()[static_cast<size_t>(i)] = -3.0;
    shifts.backward.parameters()[static_cast<size_t>(i + 1)] = -4.0;
  }
  CHECK(iic(shifts, Vec(5.0, 5.0)) == doctest::Approx(0.0).epsilon(1e-12));

  // Forward shift (3,4), identity backward: half of 25. The point must map
  // inside the backward support so the shift is not clipped to identity.
  TransformPair oneway = pair;
  for (int64_t i = 0; i < oneway.forward.parameter_count(); i += 2) {
    oneway.forward.parameters()[static_cast<size_t>(i)] = 3.0;
    oneway.forward.parameters()[static_cast<size_t>(i + 1)] = 4.0;
  }
  CHECK(iic(oneway, Vec(5.0, 4.0)) == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("iic derivatives match finite differences") {
  const GridDomain d(VecI(13, 13), Vec(1.0, 1.0));
  TransformPair pair = zero_pair(d, d, 4);
  perturb(pair.forward, 5, 0.4);
  perturb(pair.backward, 6, 0.4);

  const Vec x(6.2, 5.1);
  const IicDerivatives der = iic_derivatives(pair, x);
  const double h = 1e-5;
  int significant = 0;
  for (int grid = 0; grid < 2; ++grid) {
    BSplineField& f = grid == 0 ? pair.forward : pair.backward;
    const std::vector<double>& partials = grid == 0 ? der.forward : der.backward;
    for (size_t i = 0; i < f.parameters().size(); i += 3) {
      const double orig = f.parameters()[i];
      f.parameters()[i] = orig + h;
      const double hi = iic(pair, x);
      f.parameters()[i] = orig - h;
      const double lo = iic(pair, x);
      f.parameters()[i] = orig;
      const double fd = (hi - lo) / (2.0 * h);
      if (std::abs(fd) > 1e-6) {
        CHECK(partials[i] == doctest::Approx(fd).epsilon(1e-4));
        ++significant;
      }
    }
  }
  CHECK(significant > 10);

  // Zero round-trip error: every partial vanishes.
  TransformPair ident = zero_pair(d, d, 4);
  const IicDerivatives zero = iic_derivatives(ident, x);
  for (double v : zero.forward) CHECK(v == 0.0);
  for (double v : zero.backward) CHECK(v == 0.0);
}

TEST_CASE("identical images under identity pair give zero objective") {
  FuzzyImage img(GridDomain(VecI(16, 16), Vec(1.0, 1.0)));
  for (int64_t y = 0; y < 16; ++y) img.at(VecI(7, y)) = 1.0;
  Problem prob(img, img, 0.5);
  const TransformPair pair = zero_pair(img.domain, img.domain, 4);

  const auto samples_a = grid_samples(img.domain, 1, 40);
  const auto samples_b = grid_samples(img.domain, 2, 40);
  const ObjectiveEvaluation ev = evaluate_objective(prob.ctx, pair, samples_a, samples_b);
  REQUIRE_FALSE(ev.degenerate);
  CHECK(ev.j == 0.0);
  CHECK(ev.amd_forward == 0.0);
  CHECK(ev.awiic_forward == 0.0);
}

TEST_CASE("shifted crisp pair reproduces the exhaustive cut distance") {
  // Vertical object line at x=2 in A and x=5 in B; identity transforms.
  FuzzyImage a(GridDomain(VecI(16, 16), Vec(1.0, 1.0)));
  FuzzyImage b(a.domain);
  for (int64_t y = 0; y < 16; ++y) {
    a.at(VecI(2, y)) = 1.0;
    b.at(VecI(5, y)) = 1.0;
  }
  Problem prob(a, b, 0.0);
  const TransformPair pair = zero_pair(a.domain, b.domain, 4);

  // Samples restricted to object spels.
  std::vector<ObjectiveSample> samples_a, samples_b;
  RandomStream rng(9);
  for (int64_t y = 0; y < 16; ++y) {
    samples_a.push_back({VecI(2, y), 1.0, rng.next_double()});
    samples_b.push_back({VecI(5, y), 1.0, rng.next_double()});
  }
  const ObjectiveEvaluation ev = evaluate_objective(prob.ctx, pair, samples_a, samples_b);
  REQUIRE_FALSE(ev.degenerate);
  CHECK(ev.amd_forward == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(ev.amd_backward == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(ev.j == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("doubling sample weights leaves the evaluation invariant") {
  const FuzzyImage a = testing::random_fuzzy_image(VecI(16, 16), 21, 8);
  const FuzzyImage b = testing::random_fuzzy_image(VecI(16, 16), 22, 8);
  Problem prob(a, b, 0.5);
  TransformPair pair = zero_pair(a.domain, b.domain, 4);
  perturb(pair.forward, 31, 0.5);
  perturb(pair.backward, 32, 0.5);

  const auto s1a = grid_samples(a.domain, 4, 50, 1.0);
  const auto s1b = grid_samples(b.domain, 5, 50, 1.0);
  auto s2a = s1a;
  auto s2b = s1b;
  for (auto& s : s2a) s.weight = 2.0;
  for (auto& s : s2b) s.weight = 2.0;

  const ObjectiveEvaluation e1 = evaluate_objective(prob.ctx, pair, s1a, s1b);
  const ObjectiveEvaluation e2 = evaluate_objective(prob.ctx, pair, s2a, s2b);
  REQUIRE_FALSE(e1.degenerate);
  CHECK(e2.j == doctest::Approx(e1.j).epsilon(1e-8));
  for (size_t i = 0; i < e1.grad_forward.size(); ++i) {
    CHECK(e2.grad_forward[i] == doctest::Approx(e1.grad_forward[i]).epsilon(1e-6));
    CHECK(e2.rhat_forward[i] == doctest::Approx(e1.rhat_forward[i]).epsilon(1e-6));
  }

  // Scaled gradients are invariant too, including with epsilon = 0.
  const auto g1 = scale_gradients(e1.grad_forward, e1.rhat_forward, 0.0);
  const auto g2 = scale_gradients(e2.grad_forward, e2.rhat_forward, 0.0);
  for (size_t i = 0; i < g1.size(); ++i)
    CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-6));
}

TEST_CASE("swapping image roles mirrors the evaluation") {
  const FuzzyImage a = testing::random_fuzzy_image(VecI(12, 14), 41, 8);
  const FuzzyImage b = testing::random_fuzzy_image(VecI(13, 12), 42, 8);
  Problem fwd(a, b, 0.25);
  Problem rev(b, a, 0.25);
  TransformPair pair = zero_pair(a.domain, b.domain, 4);
  perturb(pair.forward, 51, 0.4);
  perturb(pair.backward, 52, 0.4);
  TransformPair swapped;
  swapped.forward = pair.backward;
  swapped.backward = pair.forward;

  const auto samples_a = grid_samples(a.domain, 6, 30);
  const auto samples_b = grid_samples(b.domain, 7, 30);
  const ObjectiveEvaluation e1 = evaluate_objective(fwd.ctx, pair, samples_a, samples_b);
  const ObjectiveEvaluation e2 = evaluate_objective(rev.ctx, swapped, samples_b, samples_a);
  CHECK(e1.j == e2.j);
  CHECK(e1.amd_forward == e2.amd_backward);
  CHECK(e1.amd_backward == e2.amd_forward);
  CHECK(e1.grad_forward == e2.grad_backward);
  CHECK(e1.grad_backward == e2.grad_forward);
}

TEST_CASE("objective gradient matches frozen-stochasticity finite differences") {
  const FuzzyImage a = testing::random_fuzzy_image(VecI(16, 16), 61, 8);
  const FuzzyImage b = testing::random_fuzzy_image(VecI(16, 16), 62, 8);
  const auto samples_a = grid_samples(a.domain, 8, 60);
  const auto samples_b = grid_samples(b.domain, 9, 60);

  for (double lambda : {0.0, 0.5}) {
    Problem prob(a, b, lambda);
    TransformPair pair = zero_pair(a.domain, b.domain, 4);
    perturb(pair.forward, 71, 0.3);
    perturb(pair.backward, 72, 0.3);

    const ObjectiveEvaluation ev = evaluate_objective(prob.ctx, pair, samples_a, samples_b);
    REQUIRE_FALSE(ev.degenerate);

    RandomStream pick(83);
    const double h = 1e-4;
    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 12; ++trial) {
      const bool on_forward = pick.next_double() < 0.5;
      BSplineField& f = on_forward ? pair.forward : pair.backward;
      const std::vector<double>& grad = on_forward ? ev.grad_forward : ev.grad_backward;
      const size_t i = static_cast<size_t>(pick.next_below(f.parameters().size()));

      const double orig = f.parameters()[i];
      f.parameters()[i] = orig + h;
      const double hi = evaluate_objective(prob.ctx, pair, samples_a, samples_b).j;
      f.parameters()[i] = orig - h;
      const double lo = evaluate_objective(prob.ctx, pair, samples_a, samples_b).j;
      f.parameters()[i] = orig;
      const double fd = (hi - lo) / (2.0 * h);
      if (std::abs(fd) < 1e-4) continue;
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-3));
      ++checked;
    }
    CHECK(checked >= 10);
  }
}

TEST_CASE("evaluation is bit-identical across thread counts") {
  const FuzzyImage a = testing::random_fuzzy_image(VecI(20, 20), 91, 8);
  const FuzzyImage b = testing::random_fuzzy_image(VecI(20, 20), 92, 8);
  Problem prob(a, b, 0.5);
  TransformPair pair = zero_pair(a.domain, b.domain, 5);
  perturb(pair.forward, 93, 0.4);
  perturb(pair.backward, 94, 0.4);

  const auto samples_a = grid_samples(a.domain, 10, 200);
  const auto samples_b = grid_samples(b.domain, 11, 200);

  const ObjectiveEvaluation serial = evaluate_objective(prob.ctx, pair, samples_a, samples_b);
  ThreadPool pool(8);
  const ObjectiveEvaluation parallel =
      evaluate_objective(prob.ctx, pair, samples_a, samples_b, &pool);
  CHECK(serial.j == parallel.j);
  CHECK(serial.grad_forward == parallel.grad_forward);
  CHECK(serial.grad_backward == parallel.grad_backward);
  CHECK(serial.rhat_forward == parallel.rhat_forward);
  CHECK(serial.rhat_backward == parallel.rhat_backward);
}

TEST_CASE("degenerate evaluation when all samples land outside the mask") {
  const FuzzyImage a = testing::random_fuzzy_image(VecI(10, 10), 13, 8);
  const FuzzyImage b = testing::random_fuzzy_image(VecI(10, 10), 14, 8);
  Problem prob(a, b, 0.0);
  TransformPair pair = zero_pair(a.domain, b.domain, 4);
  for (int64_t i = 0; i < pair.forward.parameter_count(); i += 2)
    pair.forward.parameters()[static_cast<size_t>(i)] = 100.0;  // everything off-grid

  const auto samples_a = grid_samples(a.domain, 15, 20);
  const auto samples_b = grid_samples(b.domain, 16, 20);
  const ObjectiveEvaluation ev = evaluate_objective(prob.ctx, pair, samples_a, samples_b);
  CHECK(ev.degenerate);
}

TEST_CASE("gradient scaling") {
  CHECK(scale_gradients({0.0}, {0.0}, 0.01) == std::vector<double>{0.0});
  CHECK(scale_gradients({2.0}, {0.0}, 0.01)[0] == doctest::Approx(200.0));
  CHECK(scale_gradients({3.0}, {0.5}, 0.0)[0] == doctest::Approx(6.0));
  CHECK(scale_gradients({0.0}, {0.0}, 0.0) == std::vector<double>{0.0});
  CHECK_THROWS_AS(scale_gradients({1.0}, {1.0, 2.0}, 0.01), std::invalid_argument);
}
