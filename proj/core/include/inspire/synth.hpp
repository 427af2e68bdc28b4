#pragma once

#include <vector>

#include "inspire/bspline.hpp"
#include "inspire/image.hpp"
#include "inspire/objective.hpp"

namespace inspire {

struct DeformationStage {
  int64_t control_points = 0;
  double range = 0.0;  // perturbations uniform in (-range, range) per coordinate
};

struct DeformationRecipe {
  std::vector<DeformationStage> stages;  // ordered coarse -> fine
  uint64_t seed = 0;

  void validate() const;
};

// Random coarse-to-fine elastic deformation; stages are composed coarse
// first. Stages whose drawn perturbations would risk folding (max
// |perturbation| >= 0.4 control spacing) are redrawn up to 10 times.
struct DeformationChain {
  std::vector<BSplineField> fields;

  Vec apply(const Vec& x) const {
    Vec y = x;
    for (const BSplineField& f : fields) y = f.transform(y);
    return y;
  }
};

DeformationChain generate_deformation(const GridDomain& domain, const DeformationRecipe& recipe);

enum class Interpolation { kNearest, kLinear };

// Plausible fill value for out-of-bounds reads when warping: the 0.5% low
// percentile of the image intensities.
double default_warp_background(const FuzzyImage& img);

// Backward warping: out(x) = img(chain(x)); out-of-bounds reads return
// `background`.
FuzzyImage warp_image(const FuzzyImage& img, const DeformationChain& chain,
                      Interpolation interp, double background = 0.0);
FuzzyImage warp_image(const FuzzyImage& img, const BSplineField& field, Interpolation interp,
                      double background = 0.0);

struct RecoveryScore {
  double jaccard = 0.0;
  double iic_mean = 0.0;
};

// Warps the floating mask into the reference space through the recovered
// backward field (nearest-neighbor) and scores overlap with the reference
// mask; masks are crisp images thresholded at 0.5.
RecoveryScore recovery_score(const FuzzyImage& ref_mask, const FuzzyImage& flo_mask,
                             const TransformPair& pair);

}  // namespace inspire
