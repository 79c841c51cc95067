#include "mfmlmc/parallel.hpp"

#include <algorithm>

namespace mfmlmc {

WorkerPool::WorkerPool(std::size_t workers) {
    const std::size_t extra = workers > 1 ? workers - 1 : 0;
    threads_.reserve(extra);
    for (std::size_t i = 0; i < extra; ++i) threads_.emplace_back([this] { worker_loop(); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
}

void WorkerPool::for_blocks(std::size_t n, const std::function<void(const BlockRange&)>& fn,
                            std::size_t block_size) {
    const std::size_t blocks = block_count(n, block_size);
    if (blocks == 0) return;
    if (threads_.empty() || blocks == 1) {
        for (std::size_t b = 0; b < blocks; ++b) {
            const std::size_t begin = b * block_size;
            fn(BlockRange{begin, std::min(n, begin + block_size), b});
        }
        return;
    }
    {
        std::lock_guard lock(mutex_);
        job_ = &fn;
        job_n_ = n;
        job_block_ = block_size;
        job_blocks_ = blocks;
        next_block_ = 0;
        finished_blocks_ = 0;
        error_ = nullptr;
        ++generation_;
    }
    wake_.notify_all();
    drain();
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return finished_blocks_ == job_blocks_; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
}

void WorkerPool::drain() {
    for (;;) {
        std::size_t b;
        const std::function<void(const BlockRange&)>* fn;
        std::size_t n, block_size;
        {
            std::lock_guard lock(mutex_);
            if (job_ == nullptr || next_block_ == job_blocks_) return;
            b = next_block_++;
            fn = job_;
            n = job_n_;
            block_size = job_block_;
        }
        try {
            const std::size_t begin = b * block_size;
            (*fn)(BlockRange{begin, std::min(n, begin + block_size), b});
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!error_) error_ = std::current_exception();
        }
        bool all_done;
        {
            std::lock_guard lock(mutex_);
            all_done = ++finished_blocks_ == job_blocks_;
        }
        if (all_done) done_.notify_all();
    }
}

void WorkerPool::worker_loop() {
    std::size_t seen = 0;
    for (;;) {
        {
            std::unique_lock lock(mutex_);
            wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
        }
        drain();
    }
}

}  // namespace mfmlmc
