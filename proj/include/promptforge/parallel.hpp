#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace promptforge {

// Applies `fn` to indices [0, n) on at most `limit` threads and returns the
// results in index order. Once any call throws, unstarted indices are
// skipped; the exception of the lowest failing index is rethrown, which is
// deterministic because indices are claimed in increasing order.
template <typename F>
auto parallel_map(std::size_t n, std::size_t limit, F&& fn)
    -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    using R = std::invoke_result_t<F&, std::size_t>;
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_acquire)) return;
            std::size_t i = next.fetch_add(1, std::memory_order_acq_rel);
            if (i >= n) return;
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
                failed.store(true, std::memory_order_release);
            }
        }
    };

    std::size_t threads = std::min(n, std::max<std::size_t>(1, limit));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace promptforge
