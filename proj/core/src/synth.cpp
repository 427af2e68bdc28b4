#include "inspire/synth.hpp"

#include <algorithm>
#include <cmath>

#include "inspire/engine.hpp"
#include "inspire/rng.hpp"

namespace inspire {

void DeformationRecipe::validate() const {
  for (const DeformationStage& st : stages) {
    if (st.control_points < 1)
      throw std::invalid_argument("recipe: control_points must be >= 1");
    if (st.range < 0.0) throw std::invalid_argument("recipe: range must be >= 0");
  }
}

DeformationChain generate_deformation(const GridDomain& domain, const DeformationRecipe& recipe) {
  recipe.validate();
  const int n = domain.dims();
  const Vec origin(n);
  const Vec extent = domain.extent();

  DeformationChain chain;
  for (size_t si = 0; si < recipe.stages.size(); ++si) {
    const DeformationStage& st = recipe.stages[si];
    VecI counts(n);
    for (int k = 0; k < n; ++k) counts[k] = st.control_points;
    double min_delta = extent[0] / static_cast<double>(st.control_points);
    for (int k = 1; k < n; ++k)
      min_delta = std::min(min_delta, extent[k] / static_cast<double>(st.control_points));
    const double fold_limit = 0.4 * min_delta;

    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
      BSplineField field(counts, origin, extent);
      RandomStream rng(stream_key(recipe.seed, si, attempt));
      double max_abs = 0.0;
      for (double& p : field.parameters()) {
        p = rng.next_double(-st.range, st.range);
        max_abs = std::max(max_abs, std::abs(p));
      }
      if (st.range == 0.0 || max_abs < fold_limit) {
        chain.fields.push_back(std::move(field));
        ok = true;
      }
    }
    if (!ok)
      throw std::runtime_error("generate_deformation: fold check failed after 10 attempts");
  }
  return chain;
}

double default_warp_background(const FuzzyImage& img) {
  if (img.membership.empty()) return 0.0;
  std::vector<double> sorted = img.membership;
  const auto nth = sorted.begin() +
                   static_cast<ptrdiff_t>(0.005 * static_cast<double>(sorted.size() - 1));
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

namespace {

FuzzyImage warp_with(const FuzzyImage& img, Interpolation interp, double background,
                     const std::function<Vec(const Vec&)>& map) {
  FuzzyImage out(img.domain);
  const int64_t count = img.domain.spel_count();
  for (int64_t idx = 0; idx < count; ++idx) {
    const Vec x = img.domain.physical(img.domain.coords(idx));
    const Vec y = map(x);
    out.membership[static_cast<size_t>(idx)] =
        interp == Interpolation::kNearest ? img.sample_nearest(y, background)
                                          : img.sample_linear(y, background);
  }
  return out;
}

}  // namespace

FuzzyImage warp_image(const FuzzyImage& img, const DeformationChain& chain,
                      Interpolation interp, double background) {
  return warp_with(img, interp, background, [&](const Vec& x) { return chain.apply(x); });
}

FuzzyImage warp_image(const FuzzyImage& img, const BSplineField& field, Interpolation interp,
                      double background) {
  return warp_with(img, interp, background, [&](const Vec& x) { return field.transform(x); });
}

RecoveryScore recovery_score(const FuzzyImage& ref_mask, const FuzzyImage& flo_mask,
                             const TransformPair& pair) {
  const FuzzyImage warped = warp_image(flo_mask, pair.backward, Interpolation::kNearest, 0.0);
  RecoveryScore score;
  score.jaccard = jaccard(alpha_cut(ref_mask, 0.5), alpha_cut(warped, 0.5));
  score.iic_mean = inverse_inconsistency_report(pair, 17).mean;
  return score;
}

}  // namespace inspire
