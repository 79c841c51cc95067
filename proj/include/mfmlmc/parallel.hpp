#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mfmlmc {

/// Fixed partition of [0, n) into blocks of `block_size`. The partition depends only on
/// n and block_size, never on the worker count, so per-block partial reductions combined
/// in block order are bit-identical for any number of workers.
struct BlockRange {
    std::size_t begin;
    std::size_t end;
    std::size_t index;
};

inline constexpr std::size_t kReductionBlock = 256;

inline std::size_t block_count(std::size_t n, std::size_t block_size = kReductionBlock) {
    return (n + block_size - 1) / block_size;
}

/// Persistent pool that runs a block function over a fixed partition.
/// The calling thread participates; `workers == 1` runs everything inline.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers = 1);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    std::size_t workers() const noexcept { return threads_.size() + 1; }

    /// Calls fn on every block of [0, n). Blocks are claimed dynamically; fn must only
    /// write to storage owned by its block. Rethrows the first exception after all blocks finish.
    void for_blocks(std::size_t n, const std::function<void(const BlockRange&)>& fn,
                    std::size_t block_size = kReductionBlock);

private:
    void worker_loop();
    void drain();

    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(const BlockRange&)>* job_ = nullptr;
    std::size_t job_n_ = 0;
    std::size_t job_block_ = 0;
    std::size_t job_blocks_ = 0;
    std::size_t next_block_ = 0;
    std::size_t finished_blocks_ = 0;
    std::size_t generation_ = 0;
    std::exception_ptr error_;
    bool stop_ = false;
};

}  // namespace mfmlmc
