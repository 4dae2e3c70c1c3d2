#pragma once

// Deterministic summation and a small index-parallel loop.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace schedest {

// Streaming cascade (pairwise) summation: values are summed in blocks of 512
// and block sums are combined along a binary counter, keeping the rounding
// error O(log N) instead of O(N). Deterministic for a fixed insertion order.
class PairwiseSum {
public:
    void add(double v) {
        block_ += v;
        if (++count_ == kBlock) {
            push(block_);
            block_ = 0.0;
            count_ = 0;
        }
    }

    double total() const {
        double s = block_;
        for (std::size_t lvl = 0; lvl < partials_.size(); ++lvl)
            if (occupied_[lvl]) s += partials_[lvl];
        return s;
    }

private:
    static constexpr int kBlock = 512;

    void push(double s) {
        std::size_t lvl = 0;
        while (lvl < partials_.size() && occupied_[lvl]) {
            s += partials_[lvl];
            occupied_[lvl] = 0;
            ++lvl;
        }
        if (lvl == partials_.size()) {
            partials_.push_back(s);
            occupied_.push_back(1);
        } else {
            partials_[lvl] = s;
            occupied_[lvl] = 1;
        }
    }

    double block_ = 0.0;
    int count_ = 0;
    std::vector<double> partials_;
    std::vector<unsigned char> occupied_;
};

// Thread count resolution: explicit request > SCHEDEST_THREADS > hardware.
inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("SCHEDEST_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n_tasks) on up to n_threads workers. Tasks must be
// independent; determinism comes from tasks writing to index-keyed slots.
template <class Fn>
void parallel_for_index(std::int64_t n_tasks, int n_threads, Fn&& fn) {
    if (n_tasks <= 0) return;
    n_threads = resolve_thread_count(n_threads);
    if (n_threads > n_tasks) n_threads = static_cast<int>(n_tasks);
    if (n_threads <= 1) {
        for (std::int64_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n_tasks) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace schedest
