#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace nmem {

template <class T>
std::vector<T> parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& fn) {
    std::vector<std::optional<T>> slots(n);
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) slots[i].emplace(fn(i));
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> stop{false};
        std::exception_ptr first_error;
        std::mutex error_mu;
        {
            std::vector<std::jthread> pool;
            pool.reserve(threads);
            for (std::size_t t = 0; t < threads; ++t) {
                pool.emplace_back([&] {
                    while (!stop.load()) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= n) return;
                        try {
                            slots[i].emplace(fn(i));
                        } catch (...) {
                            std::lock_guard lock(error_mu);
                            if (!first_error) first_error = std::current_exception();
                            stop.store(true);
                        }
                    }
                });
            }
        }
        if (first_error) std::rethrow_exception(first_error);
    }
    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace nmem
