#pragma once

#include <optional>
#include <vector>

#include "inspire/image.hpp"
#include "inspire/rng.hpp"

namespace inspire {

// Root > 1 of phi^(n+1) = phi + 1 (generalized golden ratio).
double generalized_golden_ratio(int n);

// n-dimensional Kronecker sequence over an integer grid:
// x_j(i) = floor(((x_j(0) + i a_j) mod 1) N_j), a_j = phi_n^-j.
struct KroneckerSequence {
  Vec increments;
  Vec start;
  VecI sizes;

  KroneckerSequence(VecI sizes_, Vec start_);

  VecI at(int64_t i) const;
};

// Point-sampling probabilities proportional to the thresholded Gaussian
// gradient magnitude of the image, drawn by binary search on the cumulative
// mass array. Degrades to uniform when no mass survives the threshold.
class GradientWeightedSampler {
 public:
  GradientWeightedSampler(const FuzzyImage& img, double sigma_gm, double t_gm = 1e-9);

  // Explicit per-point masses (same CMF draw machinery, arbitrary weights).
  GradientWeightedSampler(GridDomain domain, const std::vector<double>& masses,
                          double t_gm = 1e-9);

  bool degenerate_uniform() const { return degenerate_uniform_; }
  const GridDomain& domain() const { return domain_; }

  // Probability mass of a grid point (0 for filtered-out points).
  double probability(int64_t grid_index) const;

  // First retained point whose cumulative mass exceeds u in [0,1).
  VecI draw(double u) const;

 private:
  GridDomain domain_;
  bool degenerate_uniform_ = false;
  std::vector<int64_t> point_index_;  // retained grid indices
  std::vector<double> cumulative_;    // normalized, same length
};

struct DrawnPoint {
  VecI point;
  double weight = 1.0;
};

// Mixture p_m = m p_gradient + (1-m) p_uniform. The uniform component is the
// Kronecker sequence with a random starting phase per draw batch. Draws are
// keyed by an explicit stream key so parallel batches are reproducible.
class MixtureSampler {
 public:
  MixtureSampler(GridDomain domain, double m, const GradientWeightedSampler* gw);

  double mixture_weight() const { return m_; }

  std::vector<DrawnPoint> draw(uint64_t key, int64_t count) const;

 private:
  GridDomain domain_;
  double m_;
  const GradientWeightedSampler* gw_;  // not owned; may be null
};

}  // namespace inspire
