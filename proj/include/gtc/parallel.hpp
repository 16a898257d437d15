#pragma once

#include <cstddef>
#include <functional>

namespace gtc {

// Worker cap. Defaults to the GTC_THREADS environment variable when set,
// otherwise std::thread::hardware_concurrency().
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Splits [begin, end) into contiguous chunks of at least `grain` items and
// runs `body(lo, hi)` on each. Every index is owned by exactly one chunk, so
// kernels that write disjoint outputs stay bit-identical for any thread count.
void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace gtc
