#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace inspire {

// Minimal fixed-size worker pool with a blocking parallel-for. Work items
// must produce scheduling-independent results (see GradientAccumulator).
class ThreadPool {
 public:
  explicit ThreadPool(int threads) {
    const int n = std::max(1, threads);
    for (int i = 0; i < n - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

  // Runs fn(i) for i in [0, count); blocks until all complete. The calling
  // thread participates.
  void parallel_for(int64_t count, const std::function<void(int64_t)>& fn) {
    if (count <= 0) return;
    if (workers_.empty()) {
      for (int64_t i = 0; i < count; ++i) fn(i);
      return;
    }
    {
      std::lock_guard lock(mutex_);
      job_ = &fn;
      job_count_ = count;
      next_index_ = 0;
      remaining_ = count;
    }
    cv_.notify_all();
    run_available();
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [this] { return remaining_ == 0; });
    job_ = nullptr;
  }

 private:
  void run_available() {
    for (;;) {
      int64_t i;
      {
        std::lock_guard lock(mutex_);
        if (job_ == nullptr || next_index_ >= job_count_) return;
        i = next_index_++;
      }
      (*job_)(i);
      std::lock_guard lock(mutex_);
      if (--remaining_ == 0) done_cv_.notify_all();
    }
  }

  void worker_loop() {
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] {
          return stop_ || (job_ != nullptr && next_index_ < job_count_);
        });
        if (stop_) return;
      }
      run_available();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int64_t)>* job_ = nullptr;
  int64_t job_count_ = 0;
  int64_t next_index_ = 0;
  int64_t remaining_ = 0;
  bool stop_ = false;
};

}  // namespace inspire
