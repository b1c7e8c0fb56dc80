#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cluttermap {

// Persistent pool used by the batched layer kernels. Work items write only to
// disjoint per-index regions, and any cross-index reduction happens on the
// caller's thread in index order, so results do not depend on the thread
// count.
class ThreadPool {
public:
  explicit ThreadPool(int threads) {
    threads = threads < 1 ? 1 : threads;
    for (int i = 0; i < threads - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

  // Runs fn(i) for i in [begin, end). Blocks until every index is done; the
  // calling thread participates.
  void parallel_for(int begin, int end, const std::function<void(int)>& fn) {
    if (end <= begin) return;
    if (workers_.empty() || end - begin == 1) {
      for (int i = begin; i < end; ++i) fn(i);
      return;
    }
    {
      std::unique_lock lk(mu_);
      job_ = &fn;
      next_ = begin;
      end_ = end;
      pending_ = end - begin;
    }
    cv_.notify_all();
    run_indices(fn);
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

private:
  void run_indices(const std::function<void(int)>& fn) {
    for (;;) {
      int i;
      {
        std::unique_lock lk(mu_);
        if (next_ >= end_) return;
        i = next_++;
      }
      fn(i);
      std::unique_lock lk(mu_);
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void worker_loop() {
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [this] { return stop_ || (job_ && next_ < end_); });
        if (stop_) return;
        job = job_;
      }
      run_indices(*job);
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  int next_ = 0;
  int end_ = 0;
  int pending_ = 0;
  bool stop_ = false;
};

inline ThreadPool& serial_pool() {
  static ThreadPool pool(1);
  return pool;
}

}  // namespace cluttermap
