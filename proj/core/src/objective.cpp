#include "inspire/objective.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "inspire/fixed_point.hpp"

namespace inspire {

double iic(const TransformPair& pair, const Vec& x) {
  const Vec round_trip = pair.backward.transform(pair.forward.transform(x));
  return 0.5 * (round_trip - x).squared_norm();
}

namespace {

constexpr double kJacobianStep = 1e-6;

int64_t stored_linear(const VecI& counts, const VecI& p) {
  int64_t idx = 0;
  for (int i = counts.dims - 1; i >= 0; --i) idx = idx * counts[i] + p[i];
  return idx;
}

// Flat parameter indices of the 4^n control points in a local support.
void support_param_bases(const BSplineField& field, const LocalSupport& ls,
                         int64_t* out) {
  const int n = field.dims();
  const VecI counts = field.stored_counts();
  const int count = 1 << (2 * n);
  for (int c = 0; c < count; ++c) {
    VecI p(n);
    int rem = c;
    for (int k = 0; k < n; ++k) {
      p[k] = ls.base_index[k] + (rem & 3);
      rem >>= 2;
    }
    out[c] = stored_linear(counts, p) * n;
  }
}

// Spatial Jacobian of `field`'s transform by forward differences.
void forward_difference_jacobian(const BSplineField& field, const Vec& x, const Vec& tx,
                                 double jac[kMaxDims][kMaxDims]) {
  const int n = field.dims();
  for (int k = 0; k < n; ++k) {
    Vec xk = x;
    xk[k] += kJacobianStep;
    const Vec txk = field.transform(xk);
    for (int j = 0; j < n; ++j) jac[j][k] = (txk[j] - tx[j]) / kJacobianStep;
  }
}

struct SideAccumulators {
  FixedPointAccumulator* dist_grad;      // own grid
  FixedPointAccumulator* iic_grad_own;   // own grid, from this side's chain
  FixedPointAccumulator* iic_grad_other; // other grid, from this side's chain
  FixedPointAccumulator* rhat_own;
  FixedPointAccumulator* rhat_other;
  FixedPointAccumulator* scalars;        // [sum_w, sum_wd, sum_wiic]
  std::atomic<int64_t>* accepted;
};

// One side of the symmetric objective: samples from `src`, distances into
// `dst`'s trees through `own` (the transform being differentiated on this
// side); `other` closes the round trip.
void accumulate_side(const ObjectiveContext& ctx, const FuzzyImage& src,
                     const DistanceTree& dst_tree, const DistanceTree& dst_ctree,
                     const BSplineField& own, const BSplineField& other,
                     const MaskRegion& dst_mask, const WeightMap& src_weights,
                     const SearchParams& search, const ObjectiveSample* samples,
                     int64_t count, SideAccumulators& acc) {
  const int n = src.domain.dims();
  const int support = 1 << (2 * n);
  int64_t own_base[1 << (2 * kMaxDims)];
  int64_t other_base[1 << (2 * kMaxDims)];
  const double lambda = ctx.lambda;

  for (int64_t si = 0; si < count; ++si) {
    const ObjectiveSample& s = samples[si];
    const Vec x = src.domain.physical(s.point);
    const double w = s.weight * src_weights.at_index(src.domain.index(s.point));
    const Vec tx = own.transform(x);
    if (!dst_mask.contains(tx)) continue;

    acc.accepted->fetch_add(1, std::memory_order_relaxed);
    acc.scalars->add(0, w);

    SearchParams sp = search;
    sp.alpha_seed = s.alpha_seed;
    const FuzzyPoint fp{tx, src.at(s.point)};
    const DistanceSample ds = mc_distance_gradient(fp, dst_tree, dst_ctree, sp);
    acc.scalars->add(1, w * ds.value);

    const LocalSupport ls_own = own.local_support(x);
    if (ls_own.inside) {
      support_param_bases(own, ls_own, own_base);
      for (int c = 0; c < support; ++c) {
        const double wb = w * ls_own.weights[static_cast<size_t>(c)];
        for (int l = 0; l < n; ++l) {
          acc.dist_grad->add(own_base[c] + l, wb * ds.gradient[l]);
          acc.rhat_own->add(own_base[c] + l, 0.5 * wb);
        }
      }
    }

    // Inverse inconsistency of the round trip through the other grid.
    const Vec back = other.transform(tx);
    const Vec e = back - x;
    acc.scalars->add(2, w * 0.5 * e.squared_norm());

    if (lambda > 0.0) {
      const LocalSupport ls_other = other.local_support(tx);
      if (ls_other.inside) {
        support_param_bases(other, ls_other, other_base);
        for (int c = 0; c < support; ++c) {
          const double wb = w * ls_other.weights[static_cast<size_t>(c)];
          for (int l = 0; l < n; ++l) {
            acc.iic_grad_other->add(other_base[c] + l, wb * e[l]);
            acc.rhat_other->add(other_base[c] + l, 0.5 * lambda * wb);
          }
        }
      }
      if (ls_own.inside) {
        double jac[kMaxDims][kMaxDims];
        forward_difference_jacobian(other, tx, back, jac);
        double col_dot_e[kMaxDims];
        double col_norm[kMaxDims];
        for (int l = 0; l < n; ++l) {
          double d = 0.0, q = 0.0;
          for (int j = 0; j < n; ++j) {
            d += e[j] * jac[j][l];
            q += jac[j][l] * jac[j][l];
          }
          col_dot_e[l] = d;
          col_norm[l] = std::sqrt(q);
        }
        for (int c = 0; c < support; ++c) {
          const double wb = w * ls_own.weights[static_cast<size_t>(c)];
          for (int l = 0; l < n; ++l) {
            acc.iic_grad_own->add(own_base[c] + l, wb * col_dot_e[l]);
            acc.rhat_own->add(own_base[c] + l, 0.5 * lambda * wb * col_norm[l]);
          }
        }
      }
    }
  }
}

}  // namespace

IicDerivatives iic_derivatives(const TransformPair& pair, const Vec& x) {
  const int n = pair.forward.dims();
  IicDerivatives out;
  out.forward.assign(static_cast<size_t>(pair.forward.parameter_count()), 0.0);
  out.backward.assign(static_cast<size_t>(pair.backward.parameter_count()), 0.0);

  const Vec xb = pair.forward.transform(x);
  const Vec back = pair.backward.transform(xb);
  const Vec e = back - x;
  const int support = 1 << (2 * n);
  int64_t base[1 << (2 * kMaxDims)];

  const LocalSupport ls_bwd = pair.backward.local_support(xb);
  if (ls_bwd.inside) {
    support_param_bases(pair.backward, ls_bwd, base);
    for (int c = 0; c < support; ++c) {
      const double b = ls_bwd.weights[static_cast<size_t>(c)];
      for (int l = 0; l < n; ++l)
        out.backward[static_cast<size_t>(base[c] + l)] += e[l] * b;
    }
  }
  const LocalSupport ls_fwd = pair.forward.local_support(x);
  if (ls_fwd.inside) {
    double jac[kMaxDims][kMaxDims];
    forward_difference_jacobian(pair.backward, xb, back, jac);
    support_param_bases(pair.forward, ls_fwd, base);
    for (int c = 0; c < support; ++c) {
      const double b = ls_fwd.weights[static_cast<size_t>(c)];
      for (int l = 0; l < n; ++l) {
        double d = 0.0;
        for (int j = 0; j < n; ++j) d += e[j] * jac[j][l];
        out.forward[static_cast<size_t>(base[c] + l)] += d * b;
      }
    }
  }
  return out;
}

ObjectiveEvaluation evaluate_objective(const ObjectiveContext& ctx, const TransformPair& pair,
                                       const std::vector<ObjectiveSample>& samples_a,
                                       const std::vector<ObjectiveSample>& samples_b,
                                       ThreadPool* pool) {
  const int64_t pf = pair.forward.parameter_count();
  const int64_t pb = pair.backward.parameter_count();

  FixedPointAccumulator dist_f(pf), iic_f_from_a(pf), iic_f_from_b(pf);
  FixedPointAccumulator dist_b(pb), iic_b_from_a(pb), iic_b_from_b(pb);
  // Weight-times-basis sums, kept per originating sample set so each can be
  // normalized by its own total weight (like the gradient terms).
  FixedPointAccumulator rhat_f_from_a(pf), rhat_f_from_b(pf);
  FixedPointAccumulator rhat_b_from_a(pb), rhat_b_from_b(pb);
  FixedPointAccumulator scalars_a(3), scalars_b(3);
  std::atomic<int64_t> accepted_a{0}, accepted_b{0};

  SideAccumulators acc_a{&dist_f, &iic_f_from_a, &iic_b_from_a, &rhat_f_from_a,
                         &rhat_b_from_a, &scalars_a, &accepted_a};
  SideAccumulators acc_b{&dist_b, &iic_b_from_b, &iic_f_from_b, &rhat_b_from_b,
                         &rhat_f_from_b, &scalars_b, &accepted_b};

  auto run_side_range = [&](bool side_a, int64_t begin, int64_t end) {
    if (side_a) {
      accumulate_side(ctx, *ctx.img_a, *ctx.tree_b, *ctx.ctree_b, pair.forward,
                      pair.backward, ctx.mask_b, ctx.weights_a, ctx.search_ab,
                      samples_a.data() + begin, end - begin, acc_a);
    } else {
      accumulate_side(ctx, *ctx.img_b, *ctx.tree_a, *ctx.ctree_a, pair.backward,
                      pair.forward, ctx.mask_a, ctx.weights_b, ctx.search_ba,
                      samples_b.data() + begin, end - begin, acc_b);
    }
  };

  if (pool == nullptr || pool->thread_count() == 1) {
    run_side_range(true, 0, static_cast<int64_t>(samples_a.size()));
    run_side_range(false, 0, static_cast<int64_t>(samples_b.size()));
  } else {
    struct Batch {
      bool side_a;
      int64_t begin, end;
    };
    std::vector<Batch> batches;
    const int64_t chunk = 32;
    for (int64_t b = 0; b < static_cast<int64_t>(samples_a.size()); b += chunk)
      batches.push_back({true, b, std::min<int64_t>(b + chunk, samples_a.size())});
    for (int64_t b = 0; b < static_cast<int64_t>(samples_b.size()); b += chunk)
      batches.push_back({false, b, std::min<int64_t>(b + chunk, samples_b.size())});
    pool->parallel_for(static_cast<int64_t>(batches.size()), [&](int64_t i) {
      const Batch& batch = batches[static_cast<size_t>(i)];
      run_side_range(batch.side_a, batch.begin, batch.end);
    });
  }

  ObjectiveEvaluation ev;
  ev.accepted_a = accepted_a.load();
  ev.accepted_b = accepted_b.load();
  ev.saturation_count = dist_f.saturation_count() + dist_b.saturation_count() +
                        iic_f_from_a.saturation_count() + iic_f_from_b.saturation_count() +
                        iic_b_from_a.saturation_count() + iic_b_from_b.saturation_count() +
                        rhat_f_from_a.saturation_count() + rhat_f_from_b.saturation_count() +
                        rhat_b_from_a.saturation_count() + rhat_b_from_b.saturation_count() +
                        scalars_a.saturation_count() + scalars_b.saturation_count();
  if (ev.accepted_a == 0 || ev.accepted_b == 0) {
    ev.degenerate = true;
    return ev;
  }

  const double sum_w_a = scalars_a.get(0);
  const double sum_w_b = scalars_b.get(0);
  ev.amd_forward = scalars_a.get(1) / sum_w_a;
  ev.amd_backward = scalars_b.get(1) / sum_w_b;
  ev.awiic_forward = scalars_a.get(2) / sum_w_a;
  ev.awiic_backward = scalars_b.get(2) / sum_w_b;
  ev.j = 0.5 * (ev.amd_forward + ev.amd_backward) +
         0.5 * ctx.lambda * (ev.awiic_forward + ev.awiic_backward);

  ev.grad_forward.resize(static_cast<size_t>(pf));
  for (int64_t i = 0; i < pf; ++i) {
    ev.grad_forward[static_cast<size_t>(i)] =
        0.5 * dist_f.get(i) / sum_w_a +
        0.5 * ctx.lambda * (iic_f_from_a.get(i) / sum_w_a + iic_f_from_b.get(i) / sum_w_b);
  }
  ev.grad_backward.resize(static_cast<size_t>(pb));
  for (int64_t i = 0; i < pb; ++i) {
    ev.grad_backward[static_cast<size_t>(i)] =
        0.5 * dist_b.get(i) / sum_w_b +
        0.5 * ctx.lambda * (iic_b_from_b.get(i) / sum_w_b + iic_b_from_a.get(i) / sum_w_a);
  }
  ev.rhat_forward.resize(static_cast<size_t>(pf));
  for (int64_t i = 0; i < pf; ++i)
    ev.rhat_forward[static_cast<size_t>(i)] =
        rhat_f_from_a.get(i) / sum_w_a + rhat_f_from_b.get(i) / sum_w_b;
  ev.rhat_backward.resize(static_cast<size_t>(pb));
  for (int64_t i = 0; i < pb; ++i)
    ev.rhat_backward[static_cast<size_t>(i)] =
        rhat_b_from_b.get(i) / sum_w_b + rhat_b_from_a.get(i) / sum_w_a;
  return ev;
}

std::vector<double> scale_gradients(const std::vector<double>& gradients,
                                    const std::vector<double>& rhat, double epsilon) {
  if (gradients.size() != rhat.size())
    throw std::invalid_argument("scale_gradients: size mismatch");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("scale_gradients: epsilon must be >= 0");
  std::vector<double> out(gradients.size());
  for (size_t i = 0; i < gradients.size(); ++i) {
    const double denom = rhat[i] + epsilon;
    out[i] = denom > 0.0 ? gradients[i] / denom : 0.0;
  }
  return out;
}

}  // namespace inspire
