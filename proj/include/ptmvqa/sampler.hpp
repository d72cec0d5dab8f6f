#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ptmvqa {

// Splits sample indices [0, clusters.size()) into batches for one epoch.
//
// Clusters are interleaved in proportion to their size, so every batch
// mirrors the epoch's cluster mix; the last slot of a batch is forced to a
// second cluster if the batch would otherwise hold only one and another
// cluster still has samples. Each sample appears exactly once, and the
// result depends only on (clusters, batch_size, seed, epoch).
std::vector<std::vector<std::size_t>> make_balanced_batches(std::span<const std::size_t> clusters,
                                                            std::size_t batch_size, std::uint64_t seed,
                                                            std::uint64_t epoch);

}  // namespace ptmvqa
