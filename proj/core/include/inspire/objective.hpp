#pragma once

#include <vector>

#include "inspire/bspline.hpp"
#include "inspire/distance_tree.hpp"
#include "inspire/image.hpp"
#include "inspire/thread_pool.hpp"

namespace inspire {

// Jointly optimized forward (A->B) and backward (B->A) transformations.
struct TransformPair {
  BSplineField forward;
  BSplineField backward;
};

// Half squared Euclidean round-trip error of x under backward(forward(x)).
double iic(const TransformPair& pair, const Vec& x);

// Per-parameter IIC partials for both grids at a single point, for tests.
// Forward-grid partials chain through a forward-difference Jacobian of the
// backward field (step 1e-6); backward-grid partials are analytic.
struct IicDerivatives {
  std::vector<double> forward;   // per forward-grid parameter
  std::vector<double> backward;  // per backward-grid parameter
};
IicDerivatives iic_derivatives(const TransformPair& pair, const Vec& x);

struct ObjectiveContext {
  const FuzzyImage* img_a = nullptr;
  const FuzzyImage* img_b = nullptr;
  const DistanceTree* tree_a = nullptr;
  const DistanceTree* ctree_a = nullptr;
  const DistanceTree* tree_b = nullptr;
  const DistanceTree* ctree_b = nullptr;
  WeightMap weights_a;
  WeightMap weights_b;
  MaskRegion mask_a;
  MaskRegion mask_b;
  double lambda = 0.0;
  double epsilon = 0.01;
  SearchParams search_ab;  // distances into B
  SearchParams search_ba;  // distances into A
};

// One sampled source grid point. The alpha seed drives the per-sample Monte
// Carlo level draw and is frozen with the sample for reproducibility.
struct ObjectiveSample {
  VecI point;
  double weight = 1.0;
  double alpha_seed = 0.0;
};

struct ObjectiveEvaluation {
  double j = 0.0;
  double amd_forward = 0.0;
  double amd_backward = 0.0;
  double awiic_forward = 0.0;
  double awiic_backward = 0.0;
  int64_t accepted_a = 0;
  int64_t accepted_b = 0;
  bool degenerate = false;  // zero accepted samples on a side
  int64_t saturation_count = 0;

  // Unnormalized-by-scaling gradients of J per control coordinate.
  std::vector<double> grad_forward;
  std::vector<double> grad_backward;
  // Weight-times-basis-norm sums for derivative scaling.
  std::vector<double> rhat_forward;
  std::vector<double> rhat_backward;
};

// Symmetric objective: J = (amd_ab + amd_ba)/2 + lambda/2 (awiic_f + awiic_b),
// with gradients for both control grids. Parallelizes over sample batches
// when a pool is given; fixed-point accumulation keeps the result
// bit-identical for any thread count.
ObjectiveEvaluation evaluate_objective(const ObjectiveContext& ctx, const TransformPair& pair,
                                       const std::vector<ObjectiveSample>& samples_a,
                                       const std::vector<ObjectiveSample>& samples_b,
                                       ThreadPool* pool = nullptr);

// Per-parameter scaling 1/(rhat + epsilon) applied to a gradient vector.
std::vector<double> scale_gradients(const std::vector<double>& gradients,
                                    const std::vector<double>& rhat, double epsilon);

}  // namespace inspire
