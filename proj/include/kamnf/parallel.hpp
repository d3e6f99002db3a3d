#pragma once

#include <cstddef>
#include <functional>

namespace kamnf {

// Worker count used by data-parallel kernels; 1 means run inline.
void set_num_threads(int n);
int num_threads();

// Runs body(chunk) for chunk in [0, n_chunks). Chunks are independent; the
// partition is chosen by the caller so results never depend on the thread count.
void parallel_for_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& body);

} // namespace kamnf
