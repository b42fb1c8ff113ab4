#include "mvharm/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace mvharm {

int Rng::uniform_int(int lo, int hi) {
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

class Pool {
 public:
  static Pool& instance() {
    static Pool p;
    return p;
  }

  void set_threads(int n) {
    std::lock_guard<std::mutex> lk(api_mutex_);
    if (n <= 0) n = default_threads();
    if (n > 64) n = 64;
    if (n == threads_) return;
    stop_workers();
    threads_ = n;
    start_workers();
  }

  int threads() {
    std::lock_guard<std::mutex> lk(api_mutex_);
    return threads_;
  }

  void run(int64_t n, int64_t grain,
           const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    if (in_worker_) {  // nested call: run inline
      fn(0, n);
      return;
    }
    std::lock_guard<std::mutex> lk(api_mutex_);
    int workers = threads_;
    if (grain < 1) grain = 1;
    int64_t chunks = std::min<int64_t>(workers, (n + grain - 1) / grain);
    if (chunks <= 1) {
      fn(0, n);
      return;
    }
    if (worker_threads_.empty()) start_workers();

    job_fn_ = &fn;
    job_n_ = n;
    job_chunks_ = chunks;
    next_chunk_.store(0, std::memory_order_relaxed);
    done_chunks_.store(0, std::memory_order_relaxed);
    {
      std::lock_guard<std::mutex> jl(job_mutex_);
      ++job_epoch_;
    }
    job_cv_.notify_all();

    in_worker_ = true;  // caller participates
    work_on_job();
    in_worker_ = false;

    std::unique_lock<std::mutex> jl(job_mutex_);
    done_cv_.wait(jl, [&] {
      return done_chunks_.load(std::memory_order_acquire) >= job_chunks_;
    });
    job_fn_ = nullptr;
  }

 private:
  Pool() : threads_(default_threads()) {}

  ~Pool() { stop_workers(); }

  static int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
  }

  void start_workers() {
    stop_ = false;
    int count = threads_ - 1;
    for (int i = 0; i < count; ++i) {
      worker_threads_.emplace_back([this] { worker_loop(); });
    }
  }

  void stop_workers() {
    {
      std::lock_guard<std::mutex> jl(job_mutex_);
      stop_ = true;
      ++job_epoch_;
    }
    job_cv_.notify_all();
    for (auto& t : worker_threads_) t.join();
    worker_threads_.clear();
  }

  void worker_loop() {
    uint64_t seen = 0;
    in_worker_ = true;
    for (;;) {
      {
        std::unique_lock<std::mutex> jl(job_mutex_);
        job_cv_.wait(jl, [&] { return stop_ || job_epoch_ != seen; });
        seen = job_epoch_;
        if (stop_) return;
      }
      work_on_job();
    }
  }

  void work_on_job() {
    const std::function<void(int64_t, int64_t)>* fn = job_fn_;
    if (fn == nullptr) return;
    int64_t n = job_n_;
    int64_t chunks = job_chunks_;
    int64_t len = (n + chunks - 1) / chunks;
    for (;;) {
      int64_t c = next_chunk_.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) break;
      int64_t lo = c * len;
      int64_t hi = std::min<int64_t>(n, lo + len);
      if (lo < hi) (*fn)(lo, hi);
      if (done_chunks_.fetch_add(1, std::memory_order_acq_rel) + 1 >= chunks) {
        std::lock_guard<std::mutex> jl(job_mutex_);
        done_cv_.notify_all();
      }
    }
  }

  std::mutex api_mutex_;
  std::mutex job_mutex_;
  std::condition_variable job_cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> worker_threads_;
  int threads_;
  bool stop_ = false;
  uint64_t job_epoch_ = 0;
  const std::function<void(int64_t, int64_t)>* job_fn_ = nullptr;
  int64_t job_n_ = 0;
  int64_t job_chunks_ = 0;
  std::atomic<int64_t> next_chunk_{0};
  std::atomic<int64_t> done_chunks_{0};
  static thread_local bool in_worker_;
};

thread_local bool Pool::in_worker_ = false;

}  // namespace

void parallel_for(int64_t n, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn) {
  Pool::instance().run(n, grain, fn);
}

void set_thread_count(int n) { Pool::instance().set_threads(n); }

int thread_count() { return Pool::instance().threads(); }

}  // namespace mvharm
