#pragma once

#include <vector>

#include "inspire/geometry.hpp"

namespace inspire {

// Gray-scale image interpreted as a spatial fuzzy set: membership values
// in [0,1] on a rectangular grid.
struct FuzzyImage {
  GridDomain domain;
  std::vector<double> membership;

  FuzzyImage() = default;
  FuzzyImage(GridDomain d, double fill = 0.0)
      : domain(d), membership(static_cast<size_t>(d.spel_count()), fill) {}

  double at(const VecI& p) const { return membership[static_cast<size_t>(domain.index(p))]; }
  double& at(const VecI& p) { return membership[static_cast<size_t>(domain.index(p))]; }

  void validate() const;

  FuzzyImage complement() const;

  // Bilinear/trilinear sample at a physical point; out-of-support reads
  // return `background`.
  double sample_linear(const Vec& x, double background = 0.0) const;
  double sample_nearest(const Vec& x, double background = 0.0) const;
};

// A single location with a membership height.
struct FuzzyPoint {
  Vec position;
  double height = 0.0;
};

// Crisp region used for masking; `full` means the whole grid bounding box.
struct MaskRegion {
  GridDomain domain;
  bool full = true;
  std::vector<uint8_t> inside;

  static MaskRegion full_domain(GridDomain d) {
    MaskRegion m;
    m.domain = d;
    m.full = true;
    return m;
  }

  // Membership for any real point by containing-spel lookup; points outside
  // the grid bounding box are outside.
  bool contains(const Vec& x) const;
};

struct WeightMap {
  GridDomain domain;
  bool uniform_one = true;
  std::vector<double> weights;

  static WeightMap uniform(GridDomain d) {
    WeightMap w;
    w.domain = d;
    w.uniform_one = true;
    return w;
  }

  double at_index(int64_t idx) const {
    return uniform_one ? 1.0 : weights[static_cast<size_t>(idx)];
  }
};

std::vector<uint8_t> alpha_cut(const FuzzyImage& img, double alpha);

FuzzyImage gaussian_pyramid_level(const FuzzyImage& img, double sigma, int64_t factor);

struct NormalizeResult {
  FuzzyImage image;
  bool degenerate_contrast = false;
};

// clamp((mu - pct_q) / (pct_{100-q} - pct_q), 0, 1); q is a percentile in
// [0, 50). Percentiles by linear interpolation on the sorted sample.
NormalizeResult robust_normalize(const FuzzyImage& img, double q);

FuzzyImage histogram_equalize(const FuzzyImage& img, int bins);

// |A n B| / |A u B|; 1 when both masks are empty.
double jaccard(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b);

}  // namespace inspire
