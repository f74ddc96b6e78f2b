#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace quadnav {

// Reads QUADNAV_THREADS; 0 or unset means hardware concurrency.
std::size_t threads_from_env();

// Fixed pool that runs a static partition of [0, n) across workers. Chunk
// boundaries depend only on n and the worker count, and every index is
// visited exactly once, so callers that write disjoint outputs per index get
// results independent of scheduling.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t num_threads = 1);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  std::size_t size() const { return workers_.size() + 1; }

  // fn(begin, end) over contiguous chunks. Blocks until all chunks finish.
  void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

 private:
  void worker_loop(std::size_t id);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  std::size_t job_n_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
};

}  // namespace quadnav
