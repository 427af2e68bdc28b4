#include "inspire/distance_tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "inspire/rng.hpp"

namespace inspire {

void SearchParams::validate() const {
  if (n_alpha < 1) throw std::invalid_argument("SearchParams: n_alpha must be >= 1");
  if (!(d_max > 0.0)) throw std::invalid_argument("SearchParams: d_max must be > 0");
  if (!(beta >= 1.0)) throw std::invalid_argument("SearchParams: beta must be >= 1");
  if (!(d_t >= 0.0 && d_t <= d_max))
    throw std::invalid_argument("SearchParams: d_t must be in [0, d_max]");
  if (!(alpha_seed >= 0.0 && alpha_seed < 1.0))
    throw std::invalid_argument("SearchParams: alpha_seed must be in [0,1)");
}

RectSplit split_rect(const VecI& y, const VecI& R, const Vec& s) {
  const int n = y.dims;
  if (R.product() < 2) throw std::invalid_argument("split_rect: single-spel rectangle");
  int axis = 0;
  double best = -1.0;
  for (int k = 0; k < n; ++k) {
    const double extent = s[k] * static_cast<double>(R[k] - 1);
    if (extent > best) {
      best = extent;
      axis = k;
    }
  }
  RectSplit sp;
  sp.axis = axis;
  sp.y1 = y;
  sp.y2 = y;
  sp.R1 = R;
  sp.R2 = R;
  sp.R1[axis] = (R[axis] + 1) / 2;
  sp.R2[axis] = R[axis] - sp.R1[axis];
  sp.y2[axis] = y[axis] + sp.R1[axis];
  return sp;
}

double rect_lower_bound(const Vec& x, const VecI& y, const VecI& R, const Vec& s) {
  const int n = x.dims;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo = static_cast<double>(y[i]) * s[i];
    const double hi = lo + s[i] * static_cast<double>(R[i] - 1);
    const double d = std::max({0.0, lo - x[i], x[i] - hi});
    acc += d * d;
  }
  return std::sqrt(acc);
}

double relaxed_lower_bound(const Vec& x, const VecI& y, const VecI& R, const Vec& s,
                           double d_t, double beta) {
  const double d = rect_lower_bound(x, y, R, s);
  return std::max(0.0, beta * (d - d_t)) + std::min(d_t, d);
}

namespace {

int tree_height(const GridDomain& d) {
  int gamma = 1;
  for (int k = 0; k < d.dims(); ++k) {
    int bits = 0;
    while ((int64_t(1) << bits) < d.sizes[k]) ++bits;
    gamma += bits;
  }
  return gamma;
}

void build_rec(std::vector<double>& table, const GridDomain& d,
               const std::vector<double>& mu, size_t i, const VecI& y, const VecI& R) {
  if (R.product() == 1) {
    table[i] = mu[static_cast<size_t>(d.index(y))];
    return;
  }
  const RectSplit sp = split_rect(y, R, d.spacing);
  build_rec(table, d, mu, 2 * i, sp.y1, sp.R1);
  build_rec(table, d, mu, 2 * i + 1, sp.y2, sp.R2);
  table[i] = std::max(table[2 * i], table[2 * i + 1]);
}

}  // namespace

DistanceTree DistanceTree::build(const FuzzyImage& img, uint64_t memory_cap_bytes) {
  if (img.domain.spel_count() < 1) throw std::invalid_argument("build: empty image");
  const int gamma = tree_height(img.domain);
  const uint64_t bytes = (uint64_t(1) << gamma) * sizeof(double);
  if (gamma >= 62 || bytes > memory_cap_bytes)
    throw std::length_error("build: ancestor table exceeds memory cap");
  DistanceTree t;
  t.domain_ = img.domain;
  t.table_.assign(size_t(1) << gamma, 0.0);
  build_rec(t.table_, img.domain, img.membership, 1, VecI(img.domain.dims()),
            img.domain.sizes);
  return t;
}

namespace {

struct SearchCtx {
  const std::vector<double>* table;
  const GridDomain* domain;
  std::span<const Vec> points;
  std::span<const double> levels;
  std::span<double> distances;  // [levels x points]
  double d_t;
  double beta;
  std::vector<int> scratch;  // active-sample index stack, depth * n_levels
};

void search_rec(SearchCtx& ctx, size_t node, const VecI& y, const VecI& R,
                const int* active, int n_active, int depth) {
  const int np = static_cast<int>(ctx.points.size());
  const double tau = (*ctx.table)[node];
  const Vec& s = ctx.domain->spacing;

  double bounds[1 << kMaxDims];
  for (int j = 0; j < np; ++j)
    bounds[j] = relaxed_lower_bound(ctx.points[j], y, R, s, ctx.d_t, ctx.beta);

  // A sample survives if its cut is nonempty in this sub-rectangle and at
  // least one evaluation point could still be improved.
  int* next = ctx.scratch.data() + static_cast<size_t>(depth) * ctx.levels.size();
  int n_next = 0;
  for (int a = 0; a < n_active; ++a) {
    const int sample = active[a];
    if (ctx.levels[static_cast<size_t>(sample)] > tau) continue;
    double* D = ctx.distances.data() + static_cast<size_t>(sample) * ctx.points.size();
    bool improvable = false;
    for (int j = 0; j < np; ++j) {
      if (D[j] > bounds[j]) {
        improvable = true;
        break;
      }
    }
    if (improvable) next[n_next++] = sample;
  }
  if (n_next == 0) return;

  if (R.product() == 1) {
    const Vec leaf = ctx.domain->physical(y);
    double dist[1 << kMaxDims];
    for (int j = 0; j < np; ++j) dist[j] = (ctx.points[j] - leaf).norm();
    for (int a = 0; a < n_next; ++a) {
      double* D = ctx.distances.data() + static_cast<size_t>(next[a]) * ctx.points.size();
      for (int j = 0; j < np; ++j) D[j] = std::min(D[j], dist[j]);
    }
    return;
  }

  const RectSplit sp = split_rect(y, R, s);
  // Descend first into the child containing the base evaluation point.
  const int64_t p1k = static_cast<int64_t>(
      std::floor(ctx.points[0][sp.axis] / s[sp.axis]));
  if (p1k <= sp.y2[sp.axis]) {
    search_rec(ctx, 2 * node, sp.y1, sp.R1, next, n_next, depth + 1);
    search_rec(ctx, 2 * node + 1, sp.y2, sp.R2, next, n_next, depth + 1);
  } else {
    search_rec(ctx, 2 * node + 1, sp.y2, sp.R2, next, n_next, depth + 1);
    search_rec(ctx, 2 * node, sp.y1, sp.R1, next, n_next, depth + 1);
  }
}

}  // namespace

void DistanceTree::search(std::span<const Vec> points, std::span<const double> levels,
                          std::span<double> distances, double d_t, double beta) const {
  if (points.empty() || levels.empty()) return;
  if (distances.size() != points.size() * levels.size())
    throw std::invalid_argument("search: distance matrix shape mismatch");
  SearchCtx ctx;
  ctx.table = &table_;
  ctx.domain = &domain_;
  ctx.points = points;
  ctx.levels = levels;
  ctx.distances = distances;
  ctx.d_t = d_t;
  ctx.beta = beta;
  const int depth_cap = tree_height(domain_) + 2;
  ctx.scratch.resize(static_cast<size_t>(depth_cap) * levels.size());
  std::vector<int> initial(levels.size());
  for (size_t i = 0; i < levels.size(); ++i) initial[i] = static_cast<int>(i);
  search_rec(ctx, 1, VecI(domain_.dims()), domain_.sizes, initial.data(),
             static_cast<int>(initial.size()), 0);
}

DistanceSample mc_distance_gradient(const FuzzyPoint& p, const DistanceTree& tree,
                                    const DistanceTree& ctree, const SearchParams& params) {
  params.validate();
  const GridDomain& dom = tree.domain();
  if (!dom.same_shape(ctree.domain()))
    throw std::invalid_argument("mc_distance_gradient: tree domain mismatch");
  const int n = dom.dims();

  DistanceSample out;
  out.gradient = Vec(n);
  if (p.position.dims != n || !dom.contains_physical(p.position)) return out;
  out.inside = true;

  // Cell containing the query and its 2^n corner grid points.
  VecI base(n);
  Vec frac(n);
  for (int k = 0; k < n; ++k) {
    const double t = p.position[k] / dom.spacing[k];
    int64_t c = static_cast<int64_t>(std::floor(t));
    c = std::clamp<int64_t>(c, 0, std::max<int64_t>(dom.sizes[k] - 2, 0));
    base[k] = c;
    frac[k] = (dom.sizes[k] == 1) ? 0.0 : t - static_cast<double>(c);
  }
  const int np = 1 << n;
  std::vector<Vec> points(static_cast<size_t>(np));
  for (int c = 0; c < np; ++c) {
    VecI q(n);
    for (int k = 0; k < n; ++k)
      q[k] = std::min<int64_t>(base[k] + ((c >> k) & 1), dom.sizes[k] - 1);
    points[static_cast<size_t>(c)] = dom.physical(q);
  }

  // Draw alpha levels and dispatch to the set or complement tree.
  const double h = std::clamp(p.height, 0.0, 1.0);
  std::vector<double> set_levels, comp_levels;
  set_levels.reserve(static_cast<size_t>(params.n_alpha));
  comp_levels.reserve(static_cast<size_t>(params.n_alpha));
  if (params.sampling == AlphaSampling::kQuasiRandom) {
    constexpr double kInvGolden = 0.6180339887498948482;
    double x = params.alpha_seed;
    for (int j = 0; j < params.n_alpha; ++j) {
      x += kInvGolden;
      x -= std::floor(x);
      (x <= h ? set_levels : comp_levels).push_back(x <= h ? x : 1.0 - x);
    }
  } else {
    uint64_t seed_bits;
    std::memcpy(&seed_bits, &params.alpha_seed, sizeof(seed_bits));
    RandomStream rng(stream_key(seed_bits, 0x616c706861ull));
    for (int j = 0; j < params.n_alpha; ++j) {
      const double a = 1.0 - rng.next_double();  // (0, 1]
      (a <= h ? set_levels : comp_levels).push_back(a <= h ? a : 1.0 - a);
    }
  }

  std::vector<double> averaged(static_cast<size_t>(np), 0.0);
  auto run = [&](const DistanceTree& t, const std::vector<double>& levels) {
    if (levels.empty()) return;
    std::vector<double> D(levels.size() * static_cast<size_t>(np), params.d_max);
    t.search(points, levels, D, params.d_t, params.beta);
    for (size_t a = 0; a < levels.size(); ++a)
      for (int j = 0; j < np; ++j)
        averaged[static_cast<size_t>(j)] += D[a * static_cast<size_t>(np) + static_cast<size_t>(j)];
  };
  run(tree, set_levels);
  run(ctree, comp_levels);
  for (double& v : averaged) v /= static_cast<double>(params.n_alpha);

  // Multilinear interpolation of the averaged grid-point distances.
  double value = 0.0;
  for (int c = 0; c < np; ++c) {
    double w = 1.0;
    for (int k = 0; k < n; ++k) w *= ((c >> k) & 1) ? frac[k] : (1.0 - frac[k]);
    value += w * averaged[static_cast<size_t>(c)];
  }
  out.value = value;

  for (int k = 0; k < n; ++k) {
    double g = 0.0;
    for (int c = 0; c < np; ++c) {
      double w = 1.0;
      for (int m = 0; m < n; ++m) {
        if (m == k) continue;
        const double fm =
            params.stencil == GradientStencil::kMidpoint ? 0.5 : frac[m];
        w *= ((c >> m) & 1) ? fm : (1.0 - fm);
      }
      g += (((c >> k) & 1) ? w : -w) * averaged[static_cast<size_t>(c)];
    }
    out.gradient[k] = g / dom.spacing[k];
  }
  return out;
}

}  // namespace inspire
