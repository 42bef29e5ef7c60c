#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace sinkr {

// Minimal persistent worker pool. One batch of index-addressed tasks runs at
// a time; parallel_for blocks until the batch drains. Each batch owns its own
// index/pending counters so a worker waking late on a drained batch exits
// without touching the next one.
class ThreadPool {
public:
    explicit ThreadPool(unsigned num_workers)
        : num_workers_(num_workers == 0 ? 1 : num_workers) {
        for (unsigned i = 1; i < num_workers_; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    unsigned workers() const { return num_workers_; }

    // fn(i) is invoked exactly once for each i in [0, count). The calling
    // thread participates, so a pool of size 1 degenerates to a serial loop.
    void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
        if (count == 0) return;
        if (num_workers_ == 1 || count == 1) {
            for (std::size_t i = 0; i < count; ++i) fn(i);
            return;
        }
        auto batch = std::make_shared<Batch>();
        batch->fn = &fn;
        batch->count = count;
        batch->pending.store(count, std::memory_order_relaxed);
        {
            std::lock_guard lock(mu_);
            current_ = batch;
            ++generation_;
        }
        cv_.notify_all();
        run_batch(*batch);
        std::unique_lock lock(mu_);
        done_cv_.wait(lock, [&] { return batch->pending.load(std::memory_order_acquire) == 0; });
    }

private:
    struct Batch {
        const std::function<void(std::size_t)>* fn = nullptr;
        std::size_t count = 0;
        std::atomic<std::size_t> next{0};
        std::atomic<std::size_t> pending{0};
    };

    void run_batch(Batch& batch) {
        while (true) {
            const std::size_t i = batch.next.fetch_add(1, std::memory_order_relaxed);
            if (i >= batch.count) break;
            (*batch.fn)(i);
            if (batch.pending.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                std::lock_guard lock(mu_);
                done_cv_.notify_all();
            }
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            std::shared_ptr<Batch> batch;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
                if (stopping_) return;
                seen = generation_;
                batch = current_;
            }
            if (batch) run_batch(*batch);
        }
    }

    unsigned num_workers_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    std::shared_ptr<Batch> current_;
    std::uint64_t generation_ = 0;
    bool stopping_ = false;
};

}  // namespace sinkr
