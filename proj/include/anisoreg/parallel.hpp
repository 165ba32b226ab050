#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <thread>
#include <vector>

namespace anisoreg {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs body(i) for i in [0, count). Work is pulled from a shared counter, so
// scheduling is dynamic; callers that need deterministic aggregation must
// write results into per-index slots and reduce afterwards. body must not
// throw (wrap per-task work in try/catch at the call site).
template <class F>
void parallel_for(int count, int threads, F&& body) {
  threads = std::min(resolve_threads(threads), std::max(count, 1));
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

// Pairwise summation over a fixed index order; the result does not depend on
// how the values were produced across threads.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double var = 0.0;  // sample variance of the individual values
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  const std::size_t n = v.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(n);
  if (n < 2) return out;
  std::vector<double> dev2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = v[i] - out.mean;
    dev2[i] = d * d;
  }
  out.var = pairwise_sum(dev2) / static_cast<double>(n - 1);
  out.se = std::sqrt(out.var / static_cast<double>(n));
  return out;
}

// Sample covariance of paired values (same fixed order as mean_se).
inline double sample_cov(const std::vector<double>& x, const std::vector<double>& y,
                         double mean_x, double mean_y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) prod[i] = (x[i] - mean_x) * (y[i] - mean_y);
  return pairwise_sum(prod) / static_cast<double>(n - 1);
}

namespace detail {

// Neumaier compensated accumulator for long eigenvalue sums.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = s_ + x;
    if (std::abs(s_) >= std::abs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  double value() const { return s_ + c_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

}  // namespace detail

}  // namespace anisoreg
