/*
 Copyright 2026 The empc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef EMPC_THREADING_HPP
#define EMPC_THREADING_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace empc {

// Run fn(i) for i in [0, n_items) on up to n_workers threads. Workers pull
// indices from a shared counter; callers that need determinism write results
// into index-addressed slots. The first exception thrown by any worker is
// rethrown on the calling thread.
inline void parallel_for(int n_workers, int n_items,
                         const std::function<void(int)>& fn) {
    if (n_items <= 0) return;
    n_workers = std::max(1, std::min(n_workers, n_items));
    if (n_workers == 1) {
        for (int i = 0; i < n_items; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back([&]() {
            while (!failed.load(std::memory_order_relaxed)) {
                const int i = next.fetch_add(1);
                if (i >= n_items) break;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    break;
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace empc

#endif  // EMPC_THREADING_HPP
