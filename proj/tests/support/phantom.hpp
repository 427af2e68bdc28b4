#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "inspire/image.hpp"
#include "inspire/rng.hpp"

namespace inspire::testing {

// Crisp 2D phantom of random curved thin lines (quadratic Bezier strokes of
// width 1-3 px) on a dark background, for recovery experiments. `margin`
// keeps the strokes away from the border so a bounded deformation cannot
// push structure out of the domain.
inline FuzzyImage thin_structure_phantom(int64_t size, uint64_t seed, int num_lines = 14,
                                         double margin = 0.0) {
  FuzzyImage img(GridDomain(VecI(size, size), Vec(1.0, 1.0)));
  RandomStream rng(stream_key(seed, 0x7068616e746f6dull));
  const double s = static_cast<double>(size - 1);
  for (int line = 0; line < num_lines; ++line) {
    double px[3], py[3];
    for (int c = 0; c < 3; ++c) {
      px[c] = margin + rng.next_double() * (s - 2.0 * margin);
      py[c] = margin + rng.next_double() * (s - 2.0 * margin);
    }
    const double width = 1.0 + 2.0 * rng.next_double();  // stroke width 1..3 px
    const double radius = 0.5 * width;
    const int steps = static_cast<int>(4 * size);
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(steps);
      const double omt = 1.0 - t;
      const double x = omt * omt * px[0] + 2.0 * t * omt * px[1] + t * t * px[2];
      const double y = omt * omt * py[0] + 2.0 * t * omt * py[1] + t * t * py[2];
      const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(x - radius)));
      const int64_t x1 = std::min<int64_t>(size - 1, static_cast<int64_t>(std::ceil(x + radius)));
      const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(y - radius)));
      const int64_t y1 = std::min<int64_t>(size - 1, static_cast<int64_t>(std::ceil(y + radius)));
      for (int64_t yy = y0; yy <= y1; ++yy)
        for (int64_t xx = x0; xx <= x1; ++xx) {
          const double dx = static_cast<double>(xx) - x;
          const double dy = static_cast<double>(yy) - y;
          if (dx * dx + dy * dy <= radius * radius) img.at(VecI(xx, yy)) = 1.0;
        }
    }
  }
  return img;
}

// Random image with `levels` distinct membership values.
inline FuzzyImage random_fuzzy_image(const VecI& sizes, uint64_t seed, int levels = 16) {
  Vec spacing(sizes.dims);
  for (int k = 0; k < sizes.dims; ++k) spacing[k] = 1.0;
  FuzzyImage img(GridDomain(sizes, spacing));
  RandomStream rng(stream_key(seed, 0x696d616765ull));
  for (double& m : img.membership)
    m = static_cast<double>(rng.next_below(static_cast<uint64_t>(levels))) /
        static_cast<double>(levels - 1);
  return img;
}

}  // namespace inspire::testing
