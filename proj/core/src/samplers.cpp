#include "inspire/samplers.hpp"

#include <algorithm>
#include <cmath>

namespace inspire {

double generalized_golden_ratio(int n) {
  if (n < 1) throw std::invalid_argument("generalized_golden_ratio: n < 1");
  // Newton iteration on phi^(n+1) - phi - 1 = 0.
  double phi = 1.5;
  for (int it = 0; it < 128; ++it) {
    const double p = std::pow(phi, n);
    const double f = p * phi - phi - 1.0;
    const double df = static_cast<double>(n + 1) * p - 1.0;
    const double next = phi - f / df;
    if (std::abs(next - phi) < 1e-15) return next;
    phi = next;
  }
  return phi;
}

KroneckerSequence::KroneckerSequence(VecI sizes_, Vec start_)
    : increments(sizes_.dims), start(start_), sizes(sizes_) {
  const int n = sizes.dims;
  if (start.dims != n) throw std::invalid_argument("KroneckerSequence: dims mismatch");
  const double phi = generalized_golden_ratio(n);
  double a = 1.0;
  for (int j = 0; j < n; ++j) {
    a /= phi;
    increments[j] = a;
  }
}

VecI KroneckerSequence::at(int64_t i) const {
  VecI p(sizes.dims);
  for (int j = 0; j < sizes.dims; ++j) {
    double t = start[j] + static_cast<double>(i) * increments[j];
    t -= std::floor(t);
    p[j] = std::min<int64_t>(static_cast<int64_t>(t * static_cast<double>(sizes[j])),
                             sizes[j] - 1);
  }
  return p;
}

namespace {

// Gaussian-smoothed central-difference gradient magnitude, in spel units.
std::vector<double> gradient_magnitude(const FuzzyImage& img, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("GradientWeightedSampler: sigma_gm <= 0");
  const FuzzyImage smooth = gaussian_pyramid_level(img, sigma, 1);
  const GridDomain& d = img.domain;
  const int n = d.dims();
  std::vector<double> gm(smooth.membership.size(), 0.0);
  const int64_t count = d.spel_count();
  for (int64_t idx = 0; idx < count; ++idx) {
    VecI p = d.coords(idx);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      VecI lo = p, hi = p;
      lo[k] = std::max<int64_t>(p[k] - 1, 0);
      hi[k] = std::min<int64_t>(p[k] + 1, d.sizes[k] - 1);
      const double denom = static_cast<double>(hi[k] - lo[k]);
      if (denom == 0.0) continue;
      const double g = (smooth.at(hi) - smooth.at(lo)) / denom;
      acc += g * g;
    }
    gm[static_cast<size_t>(idx)] = std::sqrt(acc);
  }
  return gm;
}

}  // namespace

GradientWeightedSampler::GradientWeightedSampler(const FuzzyImage& img, double sigma_gm,
                                                 double t_gm)
    : GradientWeightedSampler(img.domain, gradient_magnitude(img, sigma_gm), t_gm) {}

GradientWeightedSampler::GradientWeightedSampler(GridDomain domain,
                                                 const std::vector<double>& masses, double t_gm)
    : domain_(domain) {
  if (masses.size() != static_cast<size_t>(domain.spel_count()))
    throw std::invalid_argument("GradientWeightedSampler: mass count mismatch");
  std::vector<double> gm = masses;
  double total = 0.0;
  for (size_t i = 0; i < gm.size(); ++i) {
    if (gm[i] < t_gm) gm[i] = 0.0;
    total += gm[i];
  }
  if (total <= 0.0) {
    degenerate_uniform_ = true;
    return;
  }
  double run = 0.0;
  for (size_t i = 0; i < gm.size(); ++i) {
    if (gm[i] == 0.0) continue;
    run += gm[i] / total;
    point_index_.push_back(static_cast<int64_t>(i));
    cumulative_.push_back(run);
  }
  cumulative_.back() = 1.0;
}

double GradientWeightedSampler::probability(int64_t grid_index) const {
  if (degenerate_uniform_) return 1.0 / static_cast<double>(domain_.spel_count());
  const auto it = std::lower_bound(point_index_.begin(), point_index_.end(), grid_index);
  if (it == point_index_.end() || *it != grid_index) return 0.0;
  const size_t pos = static_cast<size_t>(it - point_index_.begin());
  return cumulative_[pos] - (pos == 0 ? 0.0 : cumulative_[pos - 1]);
}

VecI GradientWeightedSampler::draw(double u) const {
  if (degenerate_uniform_) {
    const int64_t idx = std::min(
        static_cast<int64_t>(u * static_cast<double>(domain_.spel_count())),
        domain_.spel_count() - 1);
    return domain_.coords(idx);
  }
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const size_t pos = std::min(static_cast<size_t>(it - cumulative_.begin()),
                              cumulative_.size() - 1);
  return domain_.coords(point_index_[pos]);
}

MixtureSampler::MixtureSampler(GridDomain domain, double m, const GradientWeightedSampler* gw)
    : domain_(domain), m_(m), gw_(gw) {
  if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("MixtureSampler: m outside [0,1]");
}

std::vector<DrawnPoint> MixtureSampler::draw(uint64_t key, int64_t count) const {
  if (count < 1) throw std::invalid_argument("MixtureSampler::draw: count < 1");
  RandomStream rng(key);
  Vec phase(domain_.dims());
  for (int k = 0; k < domain_.dims(); ++k) phase[k] = rng.next_double();
  const KroneckerSequence seq(domain_.sizes, phase);

  const bool gw_usable = gw_ != nullptr && !gw_->degenerate_uniform();
  std::vector<DrawnPoint> out;
  out.reserve(static_cast<size_t>(count));
  int64_t quasi_index = 0;
  for (int64_t i = 0; i < count; ++i) {
    DrawnPoint dp;
    const bool pick_gradient = gw_usable && rng.next_double() < m_;
    if (pick_gradient) {
      dp.point = gw_->draw(rng.next_double());
    } else {
      dp.point = seq.at(quasi_index++);
    }
    out.push_back(dp);
  }
  return out;
}

}  // namespace inspire
