#include "pushrel/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace pushrel {
namespace {

thread_local bool inside_parallel = false;

class Pool {
 public:
  Pool() {
    unsigned hw = std::thread::hardware_concurrency();
    n_workers_ = hw == 0 ? 2 : static_cast<int>(hw);
    if (const char* env = std::getenv("PUSHREL_THREADS")) {
      const int n = std::atoi(env);
      if (n >= 1) n_workers_ = n;
    }
    for (int t = 1; t < n_workers_; ++t) {
      threads_.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& th : threads_) th.join();
  }

  int size() const { return n_workers_; }

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    int parts = n_workers_;
    if (n < static_cast<std::size_t>(parts)) parts = static_cast<int>(n);
    if (parts <= 1) {
      fn(0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      job_ = &fn;
      job_n_ = n;
      job_parts_ = parts;
      remaining_.store(parts, std::memory_order_relaxed);
      ++generation_;
    }
    cv_.notify_all();
    run_part(0);
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return remaining_.load(std::memory_order_acquire) == 0; });
    job_ = nullptr;
  }

 private:
  void run_part(int part) {
    std::size_t chunk = (job_n_ + job_parts_ - 1) / job_parts_;
    std::size_t lo = chunk * static_cast<std::size_t>(part);
    std::size_t hi = lo + chunk;
    if (hi > job_n_) hi = job_n_;
    if (lo < hi) {
      bool saved = inside_parallel;
      inside_parallel = true;  // nested parallel calls inside a task run inline
      (*job_)(lo, hi);
      inside_parallel = saved;
    }
    if (remaining_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      std::lock_guard<std::mutex> lk(mu_);
      done_cv_.notify_all();
    }
  }

  void worker_loop(int index) {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      int parts = job_parts_;
      lk.unlock();
      if (index < parts) run_part(index);
    }
  }

  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  int job_parts_ = 0;
  std::uint64_t generation_ = 0;
  std::atomic<int> remaining_{0};
  bool stop_ = false;
  int n_workers_ = 1;
};

Pool& pool() {
  static Pool p;
  return p;
}

}  // namespace

void parallel_ranges(std::size_t n,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  // Nested calls run inline; the pool is not reentrant.
  if (inside_parallel) {
    fn(0, n);
    return;
  }
  inside_parallel = true;
  pool().run(n, fn);
  inside_parallel = false;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  parallel_ranges(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) fn(i);
  });
}

int worker_count() { return pool().size(); }

}  // namespace pushrel
