#include "inspire/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "inspire/distance_tree.hpp"
#include "inspire/rng.hpp"

namespace inspire {

void LevelConfig::validate() const {
  if (subsample_factor < 1) throw std::invalid_argument("level: subsample_factor < 1");
  if (sigma < 0.0) throw std::invalid_argument("level: sigma < 0");
  if (control_points < 1) throw std::invalid_argument("level: control_points < 1");
  if (iterations < 0) throw std::invalid_argument("level: iterations < 0");
  if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0))
    throw std::invalid_argument("level: sampling_fraction outside (0,1]");
  if (!(d_max_over_diameter > 0.0)) throw std::invalid_argument("level: d_max <= 0");
  if (!(step_size >= 0.0)) throw std::invalid_argument("level: step_size < 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("level: momentum outside [0,1)");
  if (!(gw_m >= 0.0 && gw_m <= 1.0)) throw std::invalid_argument("level: gw_m outside [0,1]");
  if (!(gw_sigma > 0.0)) throw std::invalid_argument("level: gw_sigma <= 0");
}

void RegistrationConfig::validate() const {
  if (levels.empty()) throw std::invalid_argument("config: empty level list");
  int64_t prev = 0;
  for (const LevelConfig& l : levels) {
    l.validate();
    if (l.control_points < prev)
      throw std::invalid_argument("config: control_points must be non-decreasing");
    prev = l.control_points;
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("config: lambda outside [0,1]");
  if (n_alpha < 1) throw std::invalid_argument("config: n_alpha < 1");
  if (!(beta >= 1.0)) throw std::invalid_argument("config: beta < 1");
  if (d_t < 0.0) throw std::invalid_argument("config: d_t < 0");
  if (!(normalize_q >= 0.0 && normalize_q < 50.0))
    throw std::invalid_argument("config: normalize_q outside [0,50)");
  if (hist_bins < 2) throw std::invalid_argument("config: hist_bins < 2");
  if (!(epsilon > 0.0)) throw std::invalid_argument("config: epsilon <= 0");
}

void OptimizerState::reset(int64_t params_forward, int64_t params_backward, double step,
                           double mom) {
  velocity_forward.assign(static_cast<size_t>(params_forward), 0.0);
  velocity_backward.assign(static_cast<size_t>(params_backward), 0.0);
  step_size = step;
  momentum = mom;
  iteration = 0;
}

bool sgdm_step(OptimizerState& state, const std::vector<double>& grad_forward,
               const std::vector<double>& grad_backward, BSplineField& forward,
               BSplineField& backward) {
  if (grad_forward.size() != state.velocity_forward.size() ||
      grad_backward.size() != state.velocity_backward.size())
    throw std::invalid_argument("sgdm_step: gradient dimension mismatch");
  for (double g : grad_forward)
    if (!std::isfinite(g)) {
      ++state.rejected;
      return false;
    }
  for (double g : grad_backward)
    if (!std::isfinite(g)) {
      ++state.rejected;
      return false;
    }
  for (size_t i = 0; i < grad_forward.size(); ++i) {
    state.velocity_forward[i] = state.momentum * state.velocity_forward[i] + grad_forward[i];
    forward.parameters()[i] -= state.step_size * state.velocity_forward[i];
  }
  for (size_t i = 0; i < grad_backward.size(); ++i) {
    state.velocity_backward[i] = state.momentum * state.velocity_backward[i] + grad_backward[i];
    backward.parameters()[i] -= state.step_size * state.velocity_backward[i];
  }
  ++state.iteration;
  return true;
}

IicReport inverse_inconsistency_report(const TransformPair& pair, int lattice_density) {
  if (lattice_density < 2) throw std::invalid_argument("iic report: lattice_density < 2");
  const int n = pair.forward.dims();
  const Vec origin = pair.forward.support_origin();
  const Vec extent = pair.forward.support_extent();
  int64_t total = 1;
  for (int k = 0; k < n; ++k) total *= lattice_density;

  IicReport rep;
  double sum = 0.0, sum_sq = 0.0;
  for (int64_t idx = 0; idx < total; ++idx) {
    Vec x(n);
    int64_t rem = idx;
    for (int k = 0; k < n; ++k) {
      const int64_t i = rem % lattice_density;
      rem /= lattice_density;
      x[k] = origin[k] + extent[k] * static_cast<double>(i) /
                             static_cast<double>(lattice_density - 1);
    }
    const double v = iic(pair, x);
    sum += v;
    sum_sq += v * v;
    rep.max = std::max(rep.max, v);
  }
  rep.mean = sum / static_cast<double>(total);
  rep.stddev = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(total) - rep.mean * rep.mean));
  return rep;
}

namespace {

FuzzyImage preprocess(const FuzzyImage& img, const RegistrationConfig& cfg,
                      bool* degenerate_warning) {
  NormalizeResult norm = robust_normalize(img, cfg.normalize_q);
  if (norm.degenerate_contrast) *degenerate_warning = true;
  if (cfg.hist_eq) return histogram_equalize(norm.image, cfg.hist_bins);
  return norm.image;
}

std::vector<ObjectiveSample> draw_samples(const MixtureSampler& sampler, uint64_t draw_key,
                                          uint64_t alpha_key, int64_t count) {
  std::vector<DrawnPoint> pts = sampler.draw(draw_key, count);
  RandomStream alpha_rng(alpha_key);
  std::vector<ObjectiveSample> out(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    out[i].point = pts[i].point;
    out[i].weight = pts[i].weight;
    out[i].alpha_seed = alpha_rng.next_double();
  }
  return out;
}

}  // namespace

RegistrationResult register_pair(const FuzzyImage& img_a, const FuzzyImage& img_b,
                                 const RegistrationConfig& cfg, int threads,
                                 const ProgressCallback& callback) {
  cfg.validate();
  if (img_a.domain.dims() != img_b.domain.dims())
    throw std::invalid_argument("register_pair: dimensionality mismatch");
  const int n = img_a.domain.dims();

  RegistrationResult res;
  ThreadPool pool(threads);

  // Both control grids live on the fixed full-resolution bounding boxes so
  // that refine never extrapolates across levels.
  const Vec origin_a(n), origin_b(n);
  const Vec extent_a = img_a.domain.extent();
  const Vec extent_b = img_b.domain.extent();
  auto counts_of = [n](int64_t c) {
    VecI v(n);
    for (int k = 0; k < n; ++k) v[k] = c;
    return v;
  };

  res.pair.forward = BSplineField(counts_of(cfg.levels[0].control_points), origin_a, extent_a);
  res.pair.backward = BSplineField(counts_of(cfg.levels[0].control_points), origin_b, extent_b);

  OptimizerState opt;

  for (size_t level = 0; level < cfg.levels.size(); ++level) {
    const LevelConfig& lc = cfg.levels[level];

    if (level > 0 && lc.control_points != cfg.levels[level - 1].control_points) {
      auto rf = res.pair.forward.refine(counts_of(lc.control_points));
      auto rb = res.pair.backward.refine(counts_of(lc.control_points));
      res.refine_rms.push_back(std::max(rf.rms_residual, rb.rms_residual));
      res.pair.forward = std::move(rf.field);
      res.pair.backward = std::move(rb.field);
    }

    FuzzyImage level_a = preprocess(
        gaussian_pyramid_level(img_a, lc.sigma, lc.subsample_factor), cfg,
        &res.degenerate_contrast_warning);
    FuzzyImage level_b = preprocess(
        gaussian_pyramid_level(img_b, lc.sigma, lc.subsample_factor), cfg,
        &res.degenerate_contrast_warning);

    const DistanceTree tree_a = DistanceTree::build(level_a);
    const DistanceTree ctree_a = DistanceTree::build(level_a.complement());
    const DistanceTree tree_b = DistanceTree::build(level_b);
    const DistanceTree ctree_b = DistanceTree::build(level_b.complement());

    const GradientWeightedSampler gw_a(level_a, lc.gw_sigma);
    const GradientWeightedSampler gw_b(level_b, lc.gw_sigma);
    const MixtureSampler sampler_a(level_a.domain, lc.gw_m, &gw_a);
    const MixtureSampler sampler_b(level_b.domain, lc.gw_m, &gw_b);

    ObjectiveContext ctx;
    ctx.img_a = &level_a;
    ctx.img_b = &level_b;
    ctx.tree_a = &tree_a;
    ctx.ctree_a = &ctree_a;
    ctx.tree_b = &tree_b;
    ctx.ctree_b = &ctree_b;
    ctx.weights_a = WeightMap::uniform(level_a.domain);
    ctx.weights_b = WeightMap::uniform(level_b.domain);
    ctx.mask_a = MaskRegion::full_domain(level_a.domain);
    ctx.mask_b = MaskRegion::full_domain(level_b.domain);
    ctx.lambda = cfg.lambda;
    ctx.epsilon = cfg.epsilon;
    ctx.search_ab.n_alpha = cfg.n_alpha;
    ctx.search_ab.beta = cfg.beta;
    ctx.search_ab.d_max = lc.d_max_over_diameter * level_b.domain.diameter();
    ctx.search_ab.d_t = std::min(cfg.d_t, ctx.search_ab.d_max);
    ctx.search_ba = ctx.search_ab;
    ctx.search_ba.d_max = lc.d_max_over_diameter * level_a.domain.diameter();
    ctx.search_ba.d_t = std::min(cfg.d_t, ctx.search_ba.d_max);

    const int64_t spels = std::max(level_a.domain.spel_count(), level_b.domain.spel_count());
    const int64_t total_samples = std::max<int64_t>(
        2, static_cast<int64_t>(std::llround(lc.sampling_fraction * static_cast<double>(spels))));
    const int64_t count_a = total_samples / 2;
    const int64_t count_b = total_samples - count_a;

    opt.reset(res.pair.forward.parameter_count(), res.pair.backward.parameter_count(),
              lc.step_size, lc.momentum);

    const auto level_start = std::chrono::steady_clock::now();
    for (int64_t iter = 0; iter < lc.iterations; ++iter) {
      const std::vector<ObjectiveSample> samples_a =
          draw_samples(sampler_a, stream_key(cfg.seed, level, iter, 0),
                       stream_key(cfg.seed, level, iter, 2), count_a);
      const std::vector<ObjectiveSample> samples_b =
          draw_samples(sampler_b, stream_key(cfg.seed, level, iter, 1),
                       stream_key(cfg.seed, level, iter, 3), count_b);

      ObjectiveEvaluation ev = evaluate_objective(ctx, res.pair, samples_a, samples_b, &pool);
      if (ev.degenerate) {
        ++res.degenerate_iterations;
        continue;
      }
      const std::vector<double> gf = scale_gradients(ev.grad_forward, ev.rhat_forward, cfg.epsilon);
      const std::vector<double> gb =
          scale_gradients(ev.grad_backward, ev.rhat_backward, cfg.epsilon);
      if (!sgdm_step(opt, gf, gb, res.pair.forward, res.pair.backward)) {
        ++res.rejected_iterations;
        continue;
      }

      IterationMetrics m;
      m.level = static_cast<int>(level);
      m.iteration = iter;
      m.j = ev.j;
      m.amd_forward = ev.amd_forward;
      m.amd_backward = ev.amd_backward;
      m.iic_mean = 0.5 * (ev.awiic_forward + ev.awiic_backward);
      m.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - level_start)
                      .count();
      res.trace.push_back(m);
      if (callback) callback(m, res.pair);
    }
  }
  return res;
}

}  // namespace inspire
