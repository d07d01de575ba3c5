#include "ooload/core/thread_pool.hpp"

#include <atomic>
#include <exception>
#include <memory>

namespace ooload {

ThreadPool::ThreadPool(std::size_t threads) {
  if (threads == 0) threads = 1;
  threads_.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) threads_.emplace_back([this] { run(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void ThreadPool::submit(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    tasks_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void ThreadPool::run() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !tasks_.empty(); });
      if (tasks_.empty()) return;
      task = std::move(tasks_.front());
      tasks_.pop_front();
    }
    task();
  }
}

void ThreadPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  struct Shared {
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex mu;
    std::condition_variable cv;
    std::exception_ptr error;
  };
  auto shared = std::make_shared<Shared>();
  auto worker = [shared, n, &fn] {
    std::size_t finished = 0;
    for (std::size_t i; (i = shared->next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(shared->mu);
        if (!shared->error) shared->error = std::current_exception();
      }
      ++finished;
    }
    if (finished > 0 && shared->done.fetch_add(finished) + finished == n) {
      std::lock_guard lock(shared->mu);
      shared->cv.notify_all();
    }
  };
  const std::size_t helpers = std::min(n - 1, threads_.size());
  for (std::size_t h = 0; h < helpers; ++h) submit(worker);
  worker();
  std::unique_lock lock(shared->mu);
  shared->cv.wait(lock, [&] { return shared->done.load() == n; });
  if (shared->error) std::rethrow_exception(shared->error);
}

std::size_t default_pool_size() noexcept {
  const auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace ooload
