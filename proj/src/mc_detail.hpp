#pragma once

// Chunked, seed-stable Monte Carlo drivers shared by the estimators.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "scorelab/parallel.hpp"
#include "scorelab/random.hpp"

namespace scorelab::detail {

/// values[i] = worker(rng) for i in [0, samples). Chunk c uses the stream
/// derive_seed(seed, c); make_worker() builds per-chunk scratch state.
template <typename MakeWorker>
std::vector<double> draw_values(std::size_t samples, std::uint64_t seed, MakeWorker make_worker) {
  std::vector<double> values(samples);
  parallel_for(chunk_count(samples), [&](std::size_t c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    auto worker = make_worker();
    const std::size_t begin = c * kMcChunk;
    const std::size_t end = std::min(samples, begin + kMcChunk);
    for (std::size_t i = begin; i < end; ++i) values[i] = worker(rng);
  });
  return values;
}

}  // namespace scorelab::detail
