#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

namespace inspire {

// Fixed-point accumulation at scale 2^32 in 64-bit signed cells. Integer
// addition commutes, so concurrent accumulation gives bit-identical sums
// regardless of thread count and scheduling. Contributions outside the
// representable range are clamped and counted.
class FixedPointAccumulator {
 public:
  static constexpr double kScale = 4294967296.0;  // 2^32
  static constexpr int64_t kMaxContribution = int64_t(1) << 62;

  explicit FixedPointAccumulator(int64_t cells = 0) { resize(cells); }

  void resize(int64_t cells) {
    size_ = cells;
    cells_ = std::make_unique<std::atomic<int64_t>[]>(static_cast<size_t>(cells));
    reset();
  }

  int64_t size() const { return size_; }

  void reset() {
    for (int64_t i = 0; i < size_; ++i) cells_[static_cast<size_t>(i)].store(0, std::memory_order_relaxed);
    saturations_.store(0, std::memory_order_relaxed);
  }

  void add(int64_t i, double value) {
    const double scaled = value * kScale;
    int64_t q;
    if (std::abs(scaled) >= static_cast<double>(kMaxContribution)) {
      q = scaled > 0 ? kMaxContribution : -kMaxContribution;
      saturations_.fetch_add(1, std::memory_order_relaxed);
    } else {
      q = std::llround(scaled);
    }
    cells_[static_cast<size_t>(i)].fetch_add(q, std::memory_order_relaxed);
  }

  double get(int64_t i) const {
    return static_cast<double>(cells_[static_cast<size_t>(i)].load(std::memory_order_relaxed)) /
           kScale;
  }

  int64_t saturation_count() const { return saturations_.load(std::memory_order_relaxed); }

  std::vector<double> to_vector() const {
    std::vector<double> out(static_cast<size_t>(size_));
    for (int64_t i = 0; i < size_; ++i) out[static_cast<size_t>(i)] = get(i);
    return out;
  }

 private:
  int64_t size_ = 0;
  std::unique_ptr<std::atomic<int64_t>[]> cells_;
  std::atomic<int64_t> saturations_{0};
};

}  // namespace inspire
