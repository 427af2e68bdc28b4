#include "inspire/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace inspire {

void FuzzyImage::validate() const {
  domain.validate();
  if (static_cast<int64_t>(membership.size()) != domain.spel_count())
    throw std::invalid_argument("FuzzyImage: membership length mismatch");
  for (double m : membership) {
    if (!(m >= 0.0 && m <= 1.0))
      throw std::invalid_argument("FuzzyImage: membership outside [0,1]");
  }
}

FuzzyImage FuzzyImage::complement() const {
  FuzzyImage out(domain);
  for (size_t i = 0; i < membership.size(); ++i) out.membership[i] = 1.0 - membership[i];
  return out;
}

double FuzzyImage::sample_linear(const Vec& x, double background) const {
  const int n = domain.dims();
  if (!domain.contains_physical(x)) return background;
  VecI base(n);
  Vec frac(n);
  for (int k = 0; k < n; ++k) {
    double t = x[k] / domain.spacing[k];
    int64_t c = static_cast<int64_t>(std::floor(t));
    c = std::min(c, domain.sizes[k] - 2);
    c = std::max<int64_t>(c, 0);
    base[k] = c;
    frac[k] = (domain.sizes[k] == 1) ? 0.0 : t - static_cast<double>(c);
  }
  double acc = 0.0;
  const int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    VecI p(n);
    for (int k = 0; k < n; ++k) {
      const int bit = (c >> k) & 1;
      w *= bit ? frac[k] : (1.0 - frac[k]);
      p[k] = std::min(base[k] + bit, domain.sizes[k] - 1);
    }
    acc += w * at(p);
  }
  return acc;
}

double FuzzyImage::sample_nearest(const Vec& x, double background) const {
  const int n = domain.dims();
  if (!domain.contains_physical(x)) return background;
  VecI p(n);
  for (int k = 0; k < n; ++k) {
    int64_t c = static_cast<int64_t>(std::llround(x[k] / domain.spacing[k]));
    p[k] = std::clamp<int64_t>(c, 0, domain.sizes[k] - 1);
  }
  return at(p);
}

bool MaskRegion::contains(const Vec& x) const {
  if (!domain.contains_physical(x)) return false;
  if (full) return true;
  const int n = domain.dims();
  VecI p(n);
  for (int k = 0; k < n; ++k) {
    int64_t c = static_cast<int64_t>(std::llround(x[k] / domain.spacing[k]));
    p[k] = std::clamp<int64_t>(c, 0, domain.sizes[k] - 1);
  }
  return inside[static_cast<size_t>(domain.index(p))] != 0;
}

std::vector<uint8_t> alpha_cut(const FuzzyImage& img, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha_cut: alpha outside [0,1]");
  std::vector<uint8_t> cut(img.membership.size());
  for (size_t i = 0; i < cut.size(); ++i) cut[i] = img.membership[i] >= alpha ? 1 : 0;
  return cut;
}

namespace {

// Truncated at 4 sigma, renormalized.
std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Convolve along axis with edge clamping.
void convolve_axis(const GridDomain& d, std::vector<double>& data,
                   const std::vector<double>& kernel, int axis) {
  if (kernel.size() == 1) return;
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> out(data.size());
  const int64_t count = d.spel_count();
  for (int64_t idx = 0; idx < count; ++idx) {
    VecI p = d.coords(idx);
    double acc = 0.0;
    for (int i = -radius; i <= radius; ++i) {
      VecI q = p;
      q[axis] = std::clamp<int64_t>(p[axis] + i, 0, d.sizes[axis] - 1);
      acc += kernel[static_cast<size_t>(i + radius)] * data[static_cast<size_t>(d.index(q))];
    }
    out[static_cast<size_t>(idx)] = acc;
  }
  data.swap(out);
}

}  // namespace

FuzzyImage gaussian_pyramid_level(const FuzzyImage& img, double sigma, int64_t factor) {
  if (sigma < 0.0) throw std::invalid_argument("gaussian_pyramid_level: sigma < 0");
  if (factor < 1) throw std::invalid_argument("gaussian_pyramid_level: factor < 1");
  const int n = img.domain.dims();
  for (int k = 0; k < n; ++k) {
    if (factor > img.domain.sizes[k])
      throw std::invalid_argument("gaussian_pyramid_level: factor exceeds image size");
  }
  std::vector<double> data = img.membership;
  const std::vector<double> kernel = gaussian_kernel(sigma);
  for (int k = 0; k < n; ++k) convolve_axis(img.domain, data, kernel, k);

  if (factor == 1 && sigma == 0.0) return img;

  VecI out_sizes(n);
  Vec out_spacing(n);
  for (int k = 0; k < n; ++k) {
    out_sizes[k] = (img.domain.sizes[k] - 1) / factor + 1;
    out_spacing[k] = img.domain.spacing[k] * static_cast<double>(factor);
  }
  FuzzyImage out(GridDomain(out_sizes, out_spacing));
  const int64_t count = out.domain.spel_count();
  for (int64_t idx = 0; idx < count; ++idx) {
    VecI p = out.domain.coords(idx);
    VecI q(n);
    for (int k = 0; k < n; ++k) q[k] = p[k] * factor;
    const double v = data[static_cast<size_t>(img.domain.index(q))];
    out.membership[static_cast<size_t>(idx)] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

namespace {

// Linear interpolation on the sorted sample.
double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - t) + sorted[hi] * t;
}

}  // namespace

NormalizeResult robust_normalize(const FuzzyImage& img, double q) {
  if (!(q >= 0.0 && q < 50.0))
    throw std::invalid_argument("robust_normalize: q outside [0,50)");
  std::vector<double> sorted = img.membership;
  std::sort(sorted.begin(), sorted.end());
  const double lo = percentile(sorted, q);
  const double hi = percentile(sorted, 100.0 - q);

  NormalizeResult res;
  res.image = FuzzyImage(img.domain);
  if (hi <= lo) {
    res.degenerate_contrast = true;
    return res;
  }
  for (size_t i = 0; i < img.membership.size(); ++i) {
    res.image.membership[i] = std::clamp((img.membership[i] - lo) / (hi - lo), 0.0, 1.0);
  }
  return res;
}

FuzzyImage histogram_equalize(const FuzzyImage& img, int bins) {
  if (bins < 2) throw std::invalid_argument("histogram_equalize: bins < 2");
  std::vector<int64_t> hist(static_cast<size_t>(bins), 0);
  const double scale = static_cast<double>(bins);
  auto bin_of = [&](double v) {
    int b = static_cast<int>(v * scale);
    return std::min(b, bins - 1);
  };
  for (double v : img.membership) ++hist[static_cast<size_t>(bin_of(v))];

  std::vector<double> cdf(static_cast<size_t>(bins));
  const double total = static_cast<double>(img.membership.size());
  int64_t run = 0;
  for (int b = 0; b < bins; ++b) {
    run += hist[static_cast<size_t>(b)];
    cdf[static_cast<size_t>(b)] = static_cast<double>(run) / total;
  }
  FuzzyImage out(img.domain);
  for (size_t i = 0; i < img.membership.size(); ++i) {
    out.membership[i] = cdf[static_cast<size_t>(bin_of(img.membership[i]))];
  }
  return out;
}

double jaccard(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("jaccard: size mismatch");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace inspire
