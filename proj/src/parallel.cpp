#include "quadnav/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>

namespace quadnav {

std::size_t threads_from_env() {
  const char* raw = std::getenv("QUADNAV_THREADS");
  std::size_t n = 0;
  if (raw != nullptr && *raw != '\0') n = std::stoul(raw);
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return n;
}

namespace {

std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts, std::size_t i) {
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  const std::size_t begin = i * base + std::min(i, extra);
  return {begin, begin + base + (i < extra ? 1 : 0)};
}

}  // namespace

ThreadPool::ThreadPool(std::size_t num_threads) {
  if (num_threads == 0) num_threads = 1;
  for (std::size_t i = 1; i < num_threads; ++i) {
    workers_.emplace_back([this, i] { worker_loop(i); });
  }
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void ThreadPool::worker_loop(std::size_t id) {
  std::size_t seen = 0;
  while (true) {
    const std::function<void(std::size_t, std::size_t)>* job = nullptr;
    std::size_t n = 0;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      job = job_;
      n = job_n_;
    }
    const auto [begin, end] = chunk(n, size(), id);
    if (begin < end) (*job)(begin, end);
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

void ThreadPool::parallel_for(std::size_t n,
                              const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t parts = size();
  if (parts == 1 || n == 1) {
    fn(0, n);
    return;
  }

  // Exceptions are captured per chunk and the lowest chunk's is rethrown, so
  // the reported failure does not depend on timing.
  std::vector<std::exception_ptr> errors(parts);
  const std::function<void(std::size_t, std::size_t)> guarded = [&](std::size_t b, std::size_t e) {
    try {
      fn(b, e);
    } catch (...) {
      for (std::size_t i = 0; i < parts; ++i) {
        if (chunk(n, parts, i).first == b) errors[i] = std::current_exception();
      }
    }
  };

  {
    std::lock_guard lock(mutex_);
    job_ = &guarded;
    job_n_ = n;
    pending_ = workers_.size();
    ++generation_;
  }
  start_cv_.notify_all();

  const auto [begin, end] = chunk(n, parts, 0);
  if (begin < end) guarded(begin, end);

  {
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [&] { return pending_ == 0; });
    job_ = nullptr;
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace quadnav
