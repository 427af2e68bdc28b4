#include "inspire/bspline.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

namespace inspire {

std::array<double, 4> bspline_basis(double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double omu = 1.0 - u;
  return {
      omu * omu * omu / 6.0,
      (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
      (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
      u3 / 6.0,
  };
}

BSplineField::BSplineField(VecI control_counts, Vec support_origin, Vec support_extent)
    : control_counts_(control_counts),
      support_origin_(support_origin),
      support_extent_(support_extent),
      delta_(control_counts.dims) {
  const int n = control_counts_.dims;
  if (n < 2 || n > kMaxDims || support_origin.dims != n || support_extent.dims != n)
    throw std::invalid_argument("BSplineField: dimension mismatch");
  for (int k = 0; k < n; ++k) {
    if (control_counts_[k] < 1) throw std::invalid_argument("BSplineField: counts must be >= 1");
    if (!(support_extent_[k] > 0.0))
      throw std::invalid_argument("BSplineField: extent must be > 0");
    delta_[k] = support_extent_[k] / static_cast<double>(control_counts_[k]);
  }
  params_.assign(static_cast<size_t>(parameter_count()), 0.0);
}

VecI BSplineField::stored_counts() const {
  VecI s(dims());
  for (int k = 0; k < dims(); ++k) s[k] = control_counts_[k] + 3;
  return s;
}

int64_t BSplineField::parameter_count() const {
  return stored_counts().product() * dims();
}

namespace {
int64_t stored_index(const VecI& counts, const VecI& p) {
  int64_t idx = 0;
  for (int i = counts.dims - 1; i >= 0; --i) idx = idx * counts[i] + p[i];
  return idx;
}
}  // namespace

double BSplineField::control(const VecI& idx, int component) const {
  return params_[static_cast<size_t>(stored_index(stored_counts(), idx) * dims() + component)];
}

void BSplineField::set_control(const VecI& idx, int component, double value) {
  params_[static_cast<size_t>(stored_index(stored_counts(), idx) * dims() + component)] = value;
}

bool BSplineField::in_support(const Vec& x) const {
  for (int k = 0; k < dims(); ++k) {
    const double t = x[k] - support_origin_[k];
    if (t < 0.0 || t > support_extent_[k]) return false;
  }
  return true;
}

LocalSupport BSplineField::local_support(const Vec& x) const {
  const int n = dims();
  LocalSupport ls;
  ls.base_index = VecI(n);
  ls.fractional = Vec(n);
  if (!in_support(x)) return ls;
  ls.inside = true;

  std::array<std::array<double, 4>, kMaxDims> basis{};
  for (int k = 0; k < n; ++k) {
    const double t = (x[k] - support_origin_[k]) / delta_[k];
    int64_t cell = static_cast<int64_t>(std::floor(t));
    cell = std::clamp<int64_t>(cell, 0, control_counts_[k] - 1);
    const double u = t - static_cast<double>(cell);
    ls.base_index[k] = cell;  // stored base = cell (mesh index cell - 1)
    ls.fractional[k] = u;
    basis[static_cast<size_t>(k)] = bspline_basis(u);
  }
  const int count = 1 << (2 * n);  // 4^n
  ls.weights.resize(static_cast<size_t>(count));
  for (int c = 0; c < count; ++c) {
    double w = 1.0;
    int rem = c;
    for (int k = 0; k < n; ++k) {
      w *= basis[static_cast<size_t>(k)][static_cast<size_t>(rem & 3)];
      rem >>= 2;
    }
    ls.weights[static_cast<size_t>(c)] = w;
  }
  return ls;
}

Vec BSplineField::displacement(const Vec& x) const {
  const int n = dims();
  Vec d(n);
  const LocalSupport ls = local_support(x);
  if (!ls.inside) return d;
  const VecI counts = stored_counts();
  const int count = 1 << (2 * n);
  for (int c = 0; c < count; ++c) {
    VecI p(n);
    int rem = c;
    for (int k = 0; k < n; ++k) {
      p[k] = ls.base_index[k] + (rem & 3);
      rem >>= 2;
    }
    const size_t off = static_cast<size_t>(stored_index(counts, p) * n);
    const double w = ls.weights[static_cast<size_t>(c)];
    for (int k = 0; k < n; ++k) d[k] += w * params_[off + static_cast<size_t>(k)];
  }
  return d;
}

Vec BSplineField::transform(const Vec& x) const { return x + displacement(x); }

RefineResult BSplineField::refine(const VecI& new_counts, int fit_density) const {
  const int n = dims();
  if (new_counts.dims != n) throw std::invalid_argument("refine: dimension mismatch");
  for (int k = 0; k < n; ++k) {
    if (new_counts[k] < control_counts_[k])
      throw std::invalid_argument("refine: new counts must not decrease");
  }
  if (fit_density < 1) throw std::invalid_argument("refine: fit_density < 1");

  RefineResult res;
  res.field = BSplineField(new_counts, support_origin_, support_extent_);

  // Cell-centered sample lattice, fit_density samples per finest cell.
  VecI samples_per_dim(n);
  for (int k = 0; k < n; ++k) samples_per_dim[k] = new_counts[k] * fit_density;
  const int64_t sample_count = samples_per_dim.product();
  const int64_t unknowns = res.field.stored_counts().product();
  const int support_size = 1 << (2 * n);

  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<size_t>(sample_count) * static_cast<size_t>(support_size));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(sample_count, n);

  const VecI new_stored = res.field.stored_counts();
  for (int64_t si = 0; si < sample_count; ++si) {
    VecI sp(n);
    int64_t rem = si;
    Vec x(n);
    for (int k = 0; k < n; ++k) {
      sp[k] = rem % samples_per_dim[k];
      rem /= samples_per_dim[k];
      x[k] = support_origin_[k] +
             (static_cast<double>(sp[k]) + 0.5) / static_cast<double>(samples_per_dim[k]) *
                 support_extent_[k];
    }
    const LocalSupport ls = res.field.local_support(x);
    for (int c = 0; c < support_size; ++c) {
      VecI p(n);
      int r = c;
      for (int k = 0; k < n; ++k) {
        p[k] = ls.base_index[k] + (r & 3);
        r >>= 2;
      }
      triplets.emplace_back(static_cast<int>(si),
                            static_cast<int>(stored_index(new_stored, p)),
                            ls.weights[static_cast<size_t>(c)]);
    }
    const Vec d = displacement(x);
    for (int k = 0; k < n; ++k) rhs(si, k) = d[k];
  }

  Eigen::SparseMatrix<double> A(sample_count, unknowns);
  A.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SparseMatrix<double> AtA = Eigen::SparseMatrix<double>(A.transpose()) * A;
  Eigen::MatrixXd Atb = A.transpose() * rhs;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(AtA);
  if (solver.info() != Eigen::Success) {
    Eigen::SparseMatrix<double> ridge(unknowns, unknowns);
    ridge.setIdentity();
    AtA += ridge * 1e-8;
    solver.compute(AtA);
    res.ridge_applied = true;
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("refine: normal equations not solvable");
  }
  Eigen::MatrixXd sol = solver.solve(Atb);

  for (int64_t i = 0; i < unknowns; ++i) {
    for (int k = 0; k < n; ++k)
      res.field.params_[static_cast<size_t>(i * n + k)] = sol(i, k);
  }

  const Eigen::MatrixXd resid = A * sol - rhs;
  res.rms_residual = std::sqrt(resid.squaredNorm() /
                               static_cast<double>(sample_count * n));
  return res;
}

}  // namespace inspire
