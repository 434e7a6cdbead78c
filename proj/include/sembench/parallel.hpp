#pragma once

// Worker fan-out for element and node loops. A worker count of 1 runs every
// loop inline on the calling thread, which is the sequential reference mode.

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include "sembench/error.hpp"

namespace sembench {

/// Reads SEMBENCH_WORKERS; falls back to the hardware concurrency.
inline std::size_t default_worker_count() {
  if (const char* env = std::getenv("SEMBENCH_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError(std::string("SEMBENCH_WORKERS must be a positive integer, got '") + env +
                        "'");
    }
    return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

class Workers {
 public:
  explicit Workers(std::size_t count = default_worker_count())
      : count_(std::max<std::size_t>(1, count)) {
    if (count_ > 1) {
      control_ = std::make_unique<tbb::global_control>(
          tbb::global_control::max_allowed_parallelism, count_);
    }
  }

  std::size_t count() const noexcept { return count_; }
  bool sequential() const noexcept { return count_ == 1; }

  /// body(begin, end) over [0, n) in chunks of at least `grain`.
  template <typename Body>
  void for_range(std::size_t n, std::size_t grain, Body&& body) const {
    if (n == 0) return;
    if (sequential()) {
      body(std::size_t{0}, n);
      return;
    }
    tbb::parallel_for(
        tbb::blocked_range<std::size_t>(0, n, std::max<std::size_t>(1, grain)),
        [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); },
        tbb::simple_partitioner());
  }

 private:
  std::size_t count_;
  std::unique_ptr<tbb::global_control> control_;
};

}  // namespace sembench
