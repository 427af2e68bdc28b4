#pragma once

#include <vector>

#include "inspire/geometry.hpp"

namespace inspire {

// Cubic B-spline basis at fractional offset u in [0,1].
std::array<double, 4> bspline_basis(double u);

// Tensor-product local support of a point: base control index, fractional
// offsets and the 4^n basis weights (partition of unity).
struct LocalSupport {
  VecI base_index;                // in stored-grid coordinates (margin included)
  Vec fractional;
  std::vector<double> weights;    // 4^n entries, dimension 0 fastest
  bool inside = false;
};

struct RefineResult;

// Uniform cubic B-spline free-form deformation. The stored control grid has
// (c_k + 3) points per dimension so every point of the support has a full
// 4^n neighborhood; stored index i corresponds to mesh index i - 1.
class BSplineField {
 public:
  BSplineField() = default;
  BSplineField(VecI control_counts, Vec support_origin, Vec support_extent);

  int dims() const { return control_counts_.dims; }
  const VecI& control_counts() const { return control_counts_; }
  const Vec& support_origin() const { return support_origin_; }
  const Vec& support_extent() const { return support_extent_; }
  const Vec& delta() const { return delta_; }

  VecI stored_counts() const;
  int64_t parameter_count() const;  // stored control points * dims

  // Parameters as a flat array: control points with dimension 0 fastest,
  // n displacement components interleaved per point.
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  double control(const VecI& stored_idx, int component) const;
  void set_control(const VecI& stored_idx, int component, double value);

  bool in_support(const Vec& x) const;

  LocalSupport local_support(const Vec& x) const;

  // Identity outside the support.
  Vec transform(const Vec& x) const;
  Vec displacement(const Vec& x) const;

  // Least-squares fit of this field on a denser mesh over the same support.
  RefineResult refine(const VecI& new_counts, int fit_density = 3) const;

 private:
  VecI control_counts_;  // interior mesh resolution c_1..c_n
  Vec support_origin_;
  Vec support_extent_;
  Vec delta_;
  std::vector<double> params_;
};

struct RefineResult {
  BSplineField field;
  double rms_residual = 0.0;
  bool ridge_applied = false;
};

}  // namespace inspire
