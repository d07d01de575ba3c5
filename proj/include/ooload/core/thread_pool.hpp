#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ooload {

// Fixed-size worker pool with a FIFO task queue.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t threads);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  void submit(std::function<void()> task);

  // Runs fn(i) for i in [0, n) across the pool and the calling thread, and
  // returns when all calls have finished. Exceptions are rethrown (the first
  // one wins).
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

  std::size_t size() const noexcept { return threads_.size(); }

 private:
  void run();

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

// Worker count used for copy pools: hardware concurrency, at least 1.
std::size_t default_pool_size() noexcept;

}  // namespace ooload
