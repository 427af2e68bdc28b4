#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace inspire {

// Spatial dimensionality is 2 or 3 throughout; small vectors are stored
// inline with a runtime dimension count.
constexpr int kMaxDims = 3;

struct Vec {
  std::array<double, kMaxDims> v{0.0, 0.0, 0.0};
  int dims = 0;

  Vec() = default;
  explicit Vec(int n) : dims(n) {}
  Vec(double x, double y) : v{x, y, 0.0}, dims(2) {}
  Vec(double x, double y, double z) : v{x, y, z}, dims(3) {}

  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }

  Vec operator+(const Vec& o) const {
    Vec r(dims);
    for (int i = 0; i < dims; ++i) r[i] = v[i] + o[i];
    return r;
  }
  Vec operator-(const Vec& o) const {
    Vec r(dims);
    for (int i = 0; i < dims; ++i) r[i] = v[i] - o[i];
    return r;
  }
  Vec operator*(double c) const {
    Vec r(dims);
    for (int i = 0; i < dims; ++i) r[i] = v[i] * c;
    return r;
  }
  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dims; ++i) v[i] += o[i];
    return *this;
  }
  double dot(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < dims; ++i) s += v[i] * o[i];
    return s;
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }

  bool operator==(const Vec& o) const {
    if (dims != o.dims) return false;
    for (int i = 0; i < dims; ++i)
      if (v[i] != o[i]) return false;
    return true;
  }
};

struct VecI {
  std::array<int64_t, kMaxDims> v{0, 0, 0};
  int dims = 0;

  VecI() = default;
  explicit VecI(int n) : dims(n) {}
  VecI(int64_t x, int64_t y) : v{x, y, 0}, dims(2) {}
  VecI(int64_t x, int64_t y, int64_t z) : v{x, y, z}, dims(3) {}

  int64_t& operator[](int i) { return v[static_cast<size_t>(i)]; }
  int64_t operator[](int i) const { return v[static_cast<size_t>(i)]; }

  bool operator==(const VecI& o) const {
    if (dims != o.dims) return false;
    for (int i = 0; i < dims; ++i)
      if (v[i] != o[i]) return false;
    return true;
  }

  int64_t product() const {
    int64_t p = 1;
    for (int i = 0; i < dims; ++i) p *= v[i];
    return p;
  }

  Vec to_vec() const {
    Vec r(dims);
    for (int i = 0; i < dims; ++i) r[i] = static_cast<double>(v[i]);
    return r;
  }
};

// Rectangular grid with per-dimension physical spel spacing. All distances
// and transforms operate in physical coordinates (index * spacing).
struct GridDomain {
  VecI sizes;
  Vec spacing;

  GridDomain() = default;
  GridDomain(VecI sizes_, Vec spacing_) : sizes(sizes_), spacing(spacing_) {
    validate();
  }

  int dims() const { return sizes.dims; }
  int64_t spel_count() const { return sizes.product(); }

  void validate() const {
    if (sizes.dims < 2 || sizes.dims > kMaxDims || sizes.dims != spacing.dims)
      throw std::invalid_argument("GridDomain: dims must be 2 or 3");
    for (int i = 0; i < sizes.dims; ++i) {
      if (sizes[i] < 1) throw std::invalid_argument("GridDomain: sizes must be >= 1");
      if (!(spacing[i] > 0.0))
        throw std::invalid_argument("GridDomain: spacing must be > 0");
    }
  }

  // Linear index with dimension 0 fastest.
  int64_t index(const VecI& p) const {
    int64_t idx = 0;
    for (int i = dims() - 1; i >= 0; --i) idx = idx * sizes[i] + p[i];
    return idx;
  }

  VecI coords(int64_t idx) const {
    VecI p(dims());
    for (int i = 0; i < dims(); ++i) {
      p[i] = idx % sizes[i];
      idx /= sizes[i];
    }
    return p;
  }

  Vec physical(const VecI& p) const {
    Vec r(dims());
    for (int i = 0; i < dims(); ++i) r[i] = static_cast<double>(p[i]) * spacing[i];
    return r;
  }

  // Physical extent spanned by the grid points (spel centers).
  Vec extent() const {
    Vec r(dims());
    for (int i = 0; i < dims(); ++i)
      r[i] = spacing[i] * static_cast<double>(sizes[i] - 1);
    return r;
  }

  double diameter() const { return extent().norm(); }

  bool contains_physical(const Vec& x) const {
    for (int i = 0; i < dims(); ++i) {
      if (x[i] < 0.0 || x[i] > spacing[i] * static_cast<double>(sizes[i] - 1))
        return false;
    }
    return true;
  }

  bool same_shape(const GridDomain& o) const {
    return sizes == o.sizes && spacing == o.spacing;
  }
};

}  // namespace inspire
