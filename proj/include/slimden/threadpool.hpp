// Copyright (c) 2026 the slimdenoise authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace slimden {

// Persistent worker pool with a single blocking parallel_for. Work items are
// claimed through an atomic counter; callers are responsible for writing
// results into per-index slots so that reductions can run in index order
// afterwards (that is what keeps training bitwise reproducible regardless of
// scheduling).
class ThreadPool {
public:
    explicit ThreadPool(int workers = 0) {
        if (workers <= 0) {
            workers = static_cast<int>(std::thread::hardware_concurrency());
            if (workers <= 0) workers = 1;
        }
        workers_ = workers;
        for (int i = 0; i + 1 < workers_; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const { return workers_; }

    void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
        if (count == 0) return;
        if (workers_ == 1 || count == 1) {
            for (std::size_t i = 0; i < count; ++i) fn(i);
            return;
        }
        {
            std::lock_guard<std::mutex> lk(mu_);
            job_ = &fn;
            next_ = 0;
            limit_ = count;
            pending_ = count;
            ++generation_;
        }
        cv_.notify_all();
        run_until_drained();
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [this] { return pending_ == 0; });
        job_ = nullptr;
    }

private:
    void run_until_drained() {
        while (true) {
            const std::size_t i = next_.fetch_add(1);
            if (i >= limit_) break;
            (*job_)(i);
            if (pending_.fetch_sub(1) == 1) {
                std::lock_guard<std::mutex> lk(mu_);
                done_cv_.notify_all();
            }
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            run_until_drained();
        }
    }

    int workers_ = 1;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::atomic<std::size_t> next_{0};
    std::size_t limit_ = 0;
    std::atomic<std::size_t> pending_{0};
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

}  // namespace slimden
