#pragma once

#include <span>
#include <vector>

#include "inspire/image.hpp"

namespace inspire {

// How the alpha levels for the Monte Carlo estimator are drawn. Pseudo-random
// draws are i.i.d. uniform from a counter-based stream; quasi-random follows
// the 1D golden-ratio Kronecker sequence (lower variance, but no longer the
// plain Monte Carlo convergence rate).
enum class AlphaSampling { kPseudoRandom, kQuasiRandom };

// Spatial gradient stencil for the interpolated distance. kInterpolated is
// the exact gradient of the multilinear interpolant at the query point;
// kMidpoint is the hypercube-face difference evaluated at the cell mid-point.
enum class GradientStencil { kInterpolated, kMidpoint };

struct SearchParams {
  int n_alpha = 7;
  double d_max = 0.0;          // saturation distance, length units
  double beta = 1.2;           // bound relaxation factor, >= 1
  double d_t = 20.0;           // relaxation onset threshold
  double alpha_seed = 0.0;     // in [0,1)
  AlphaSampling sampling = AlphaSampling::kPseudoRandom;
  GradientStencil stencil = GradientStencil::kInterpolated;

  void validate() const;
};

struct DistanceSample {
  double value = 0.0;
  Vec gradient;
  bool inside = false;
};

struct RectSplit {
  VecI y1, y2, R1, R2;
  int axis = 0;
};

// Split along argmax_k s_k (R_k - 1), ties broken by lowest dimension index;
// R1 takes the ceiling half.
RectSplit split_rect(const VecI& y, const VecI& R, const Vec& s);

// Euclidean distance from physical point x to the nearest spel of the
// rectangle with integer corner y, integer size R and spacing s.
double rect_lower_bound(const Vec& x, const VecI& y, const VecI& R, const Vec& s);

// max(0, beta (d_R - d_t)) + min(d_t, d_R); equals d_R when beta = 1.
double relaxed_lower_bound(const Vec& x, const VecI& y, const VecI& R, const Vec& s,
                           double d_t, double beta);

// Implicit augmented KD-tree over a fuzzy image, stored as a flat ancestor
// table of sub-rectangle maximum memberships. Node i has children 2i and
// 2i+1; the root is node 1. Immutable after construction and safe to share
// across concurrent searches.
class DistanceTree {
 public:
  static constexpr uint64_t kDefaultMemoryCapBytes = 1ull << 32;

  static DistanceTree build(const FuzzyImage& img,
                            uint64_t memory_cap_bytes = kDefaultMemoryCapBytes);

  const std::vector<double>& table() const { return table_; }
  const GridDomain& domain() const { return domain_; }
  double root_value() const { return table_[1]; }

  // Joint pruned search for several cut levels at once. `points` are the
  // physical evaluation points (2^n nearest grid points of a query, but any
  // set works); `distances` is a row-major [levels x points] matrix holding
  // the current best distances, typically initialized to d_max. With beta=1
  // the result is exact: min(d_max, distance to nearest spel of the cut).
  void search(std::span<const Vec> points, std::span<const double> levels,
              std::span<double> distances, double d_t, double beta) const;

 private:
  GridDomain domain_;
  std::vector<double> table_;
};

// Monte Carlo estimate of the bidirectional alpha-cut point-to-set distance
// and its spatial gradient at a fuzzy point. `tree` indexes the set and
// `ctree` its complement. Queries outside the grid support return
// inside=false with zero value and gradient.
DistanceSample mc_distance_gradient(const FuzzyPoint& p, const DistanceTree& tree,
                                    const DistanceTree& ctree, const SearchParams& params);

}  // namespace inspire
