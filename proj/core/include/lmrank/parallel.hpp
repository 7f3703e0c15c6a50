#pragma once

#include <cstddef>
#include <functional>

namespace lmrank {

// Resolves a worker-count flag: values <= 0 mean "use all hardware threads".
std::size_t resolve_threads(int threads);

// Runs fn(begin, end) over disjoint contiguous chunks of [0, n), one chunk
// per worker. Chunk boundaries depend only on n and the resolved worker
// count, never on scheduling. The first exception thrown by any worker is
// rethrown after all workers have joined.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace lmrank
