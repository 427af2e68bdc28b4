#pragma once

#include <functional>
#include <string>
#include <vector>

#include "inspire/objective.hpp"
#include "inspire/samplers.hpp"

namespace inspire {

struct LevelConfig {
  int64_t subsample_factor = 1;
  double sigma = 0.0;               // pyramid smoothing, spels
  int64_t control_points = 8;       // per dimension
  int64_t iterations = 100;
  double sampling_fraction = 0.01;  // fraction of spels per iteration
  double d_max_over_diameter = 0.1;
  double step_size = 1.0;           // length units per unit scaled gradient
  double momentum = 0.9;
  double gw_m = 0.5;                // gradient-weighted mixture weight
  double gw_sigma = 1.0;

  void validate() const;
};

struct RegistrationConfig {
  std::vector<LevelConfig> levels;
  double lambda = 0.005;
  int n_alpha = 7;
  double beta = 1.2;
  double d_t = 20.0;
  double normalize_q = 0.025;
  bool hist_eq = false;
  int hist_bins = 256;
  double epsilon = 0.01;
  uint64_t seed = 0;

  void validate() const;
};

struct IterationMetrics {
  int level = 0;
  int64_t iteration = 0;
  double j = 0.0;
  double amd_forward = 0.0;
  double amd_backward = 0.0;
  double iic_mean = 0.0;
  double wall_ms = 0.0;
};

using ProgressCallback =
    std::function<void(const IterationMetrics&, const TransformPair&)>;

struct RegistrationResult {
  TransformPair pair;
  std::vector<IterationMetrics> trace;
  std::vector<double> refine_rms;  // one per level transition
  int64_t degenerate_iterations = 0;
  int64_t rejected_iterations = 0;
  bool degenerate_contrast_warning = false;
};

// Heavy-ball SGDM on both control grids; velocities live across iterations
// within a level and reset at level transitions.
struct OptimizerState {
  std::vector<double> velocity_forward;
  std::vector<double> velocity_backward;
  double step_size = 1.0;
  double momentum = 0.0;
  int64_t iteration = 0;
  int64_t rejected = 0;

  void reset(int64_t params_forward, int64_t params_backward, double step, double mom);
};

// v <- momentum v + g; phi <- phi - step v. Non-finite gradients reject the
// whole iteration.
bool sgdm_step(OptimizerState& state, const std::vector<double>& grad_forward,
               const std::vector<double>& grad_backward, BSplineField& forward,
               BSplineField& backward);

struct IicReport {
  double mean = 0.0;
  double max = 0.0;
  double stddev = 0.0;
};

// IIC summary over a regular lattice of lattice_density points per dimension
// across the forward field's support.
IicReport inverse_inconsistency_report(const TransformPair& pair, int lattice_density);

// Coarse-to-fine registration of img_a (floating) onto img_b (reference).
// Deterministic for a fixed config and seed, independent of thread count.
RegistrationResult register_pair(const FuzzyImage& img_a, const FuzzyImage& img_b,
                                 const RegistrationConfig& cfg, int threads = 1,
                                 const ProgressCallback& callback = nullptr);

}  // namespace inspire
