#include <benchmark/benchmark.h>

#include "inspire/distance_tree.hpp"
#include "inspire/engine.hpp"
#include "inspire/objective.hpp"
#include "inspire/rng.hpp"

using namespace inspire;

namespace {

FuzzyImage random_image(int64_t side, uint64_t seed) {
  FuzzyImage img(GridDomain(VecI(side, side), Vec(1.0, 1.0)));
  RandomStream rng(seed);
  for (double& m : img.membership) m = rng.next_double();
  return img;
}

void bm_tree_build(benchmark::State& state) {
  const FuzzyImage img = random_image(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(DistanceTree::build(img));
}
BENCHMARK(bm_tree_build)->Arg(64)->Arg(256)->Arg(512);

void bm_tree_search(benchmark::State& state) {
  const FuzzyImage img = random_image(state.range(0), 2);
  const DistanceTree tree = DistanceTree::build(img);
  RandomStream rng(3);
  const double d_max = 0.1 * img.domain.diameter();
  std::vector<Vec> points(4, Vec(2));
  std::vector<double> levels(7);
  for (auto _ : state) {
    for (Vec& p : points) {
      p[0] = rng.next_double() * img.domain.extent()[0];
      p[1] = rng.next_double() * img.domain.extent()[1];
    }
    for (double& l : levels) l = rng.next_double();
    std::vector<double> dist(points.size() * levels.size(), d_max);
    tree.search(points, levels, dist, 20.0, 1.2);
    benchmark::DoNotOptimize(dist);
  }
}
BENCHMARK(bm_tree_search)->Arg(64)->Arg(256)->Arg(512);

void bm_mc_distance(benchmark::State& state) {
  const FuzzyImage img = random_image(128, 4);
  const DistanceTree tree = DistanceTree::build(img);
  const DistanceTree ctree = DistanceTree::build(img.complement());
  SearchParams params;
  params.n_alpha = static_cast<int>(state.range(0));
  params.d_max = 18.0;
  params.d_t = 18.0;
  RandomStream rng(5);
  FuzzyPoint p;
  p.position = Vec(2);
  for (auto _ : state) {
    p.position[0] = rng.next_double() * 127.0;
    p.position[1] = rng.next_double() * 127.0;
    p.height = rng.next_double();
    params.alpha_seed = rng.next_double();
    benchmark::DoNotOptimize(mc_distance_gradient(p, tree, ctree, params));
  }
}
BENCHMARK(bm_mc_distance)->Arg(7)->Arg(15)->Arg(63);

void bm_bspline_transform(benchmark::State& state) {
  BSplineField field(VecI(state.range(0), state.range(0)), Vec(0.0, 0.0), Vec(256.0, 256.0));
  RandomStream rng(6);
  for (double& p : field.parameters()) p = rng.next_double(-2.0, 2.0);
  Vec x(2);
  for (auto _ : state) {
    x[0] = rng.next_double() * 256.0;
    x[1] = rng.next_double() * 256.0;
    benchmark::DoNotOptimize(field.transform(x));
  }
}
BENCHMARK(bm_bspline_transform)->Arg(8)->Arg(32);

void bm_objective_evaluation(benchmark::State& state) {
  const FuzzyImage a = random_image(128, 7);
  const FuzzyImage b = random_image(128, 8);
  const DistanceTree ta = DistanceTree::build(a), ca = DistanceTree::build(a.complement());
  const DistanceTree tb = DistanceTree::build(b), cb = DistanceTree::build(b.complement());
  ObjectiveContext ctx;
  ctx.img_a = &a;
  ctx.img_b = &b;
  ctx.tree_a = &ta;
  ctx.ctree_a = &ca;
  ctx.tree_b = &tb;
  ctx.ctree_b = &cb;
  ctx.weights_a = WeightMap::uniform(a.domain);
  ctx.weights_b = WeightMap::uniform(b.domain);
  ctx.mask_a = MaskRegion::full_domain(a.domain);
  ctx.mask_b = MaskRegion::full_domain(b.domain);
  ctx.lambda = 0.005;
  ctx.search_ab.d_max = 18.0;
  ctx.search_ab.d_t = 18.0;
  ctx.search_ba = ctx.search_ab;
  TransformPair pair;
  pair.forward = BSplineField(VecI(12, 12), Vec(2), a.domain.extent());
  pair.backward = pair.forward;
  RandomStream rng(9);
  std::vector<ObjectiveSample> sa, sb;
  for (int64_t i = 0; i < state.range(0); ++i) {
    sa.push_back({VecI(static_cast<int64_t>(rng.next_below(128)),
                       static_cast<int64_t>(rng.next_below(128))),
                  1.0, rng.next_double()});
    sb.push_back({VecI(static_cast<int64_t>(rng.next_below(128)),
                       static_cast<int64_t>(rng.next_below(128))),
                  1.0, rng.next_double()});
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_objective(ctx, pair, sa, sb));
}
BENCHMARK(bm_objective_evaluation)->Arg(128)->Arg(512);

void bm_small_registration(benchmark::State& state) {
  const FuzzyImage a = random_image(64, 10);
  const FuzzyImage b = random_image(64, 11);
  RegistrationConfig cfg;
  LevelConfig lc;
  lc.control_points = 6;
  lc.iterations = 20;
  lc.sampling_fraction = 0.05;
  cfg.levels.push_back(lc);
  for (auto _ : state) benchmark::DoNotOptimize(register_pair(a, b, cfg));
}
BENCHMARK(bm_small_registration);

}  // namespace

BENCHMARK_MAIN();
