#pragma once

#include <cstddef>
#include <functional>

namespace sohpie {

// Number of workers to use when a stage is asked for "auto" threads.
// Resolution order: explicit request > SOHPIE_THREADS env var > hardware.
std::size_t resolve_threads(std::size_t requested);

// Runs fn(i) for i in [0, count). Tasks must be independent; each writes only
// to its own output slot, so results do not depend on the thread count.
// threads == 1 runs inline on the calling thread.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace sohpie
