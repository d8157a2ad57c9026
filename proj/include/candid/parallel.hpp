#pragma once

// Worker-count configuration and a static-partition parallel loop. Each index
// is processed by exactly one worker, so results do not depend on the thread
// count as long as iterations write disjoint outputs.

#include <cstddef>
#include <functional>

namespace candid {

/// CANDID_THREADS if set (must be a positive integer), otherwise the
/// hardware concurrency. Throws std::runtime_error on a malformed value.
std::size_t worker_count();

/// Parses a CANDID_THREADS value; exposed for testing.
std::size_t parse_worker_count(const char* value);

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& body);

}  // namespace candid
