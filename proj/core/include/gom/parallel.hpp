#pragma once

#include <cstddef>
#include <functional>

namespace gom {

/// Worker count used by the parallel kernels. Defaults to the hardware
/// concurrency; 1 runs everything inline.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Splits [0, n) into at most thread_count() contiguous chunks and runs
/// body(chunk, begin, end) for each. The partition depends only on n and the
/// thread count, so per-chunk buffers merged in chunk order are reproducible.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

/// Number of chunks parallel_chunks will use for n items.
std::size_t chunk_count(std::size_t n);

}  // namespace gom
