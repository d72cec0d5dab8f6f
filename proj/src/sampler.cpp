#include "ptmvqa/sampler.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "ptmvqa/errors.hpp"
#include "ptmvqa/rng.hpp"

namespace ptmvqa {

std::vector<std::vector<std::size_t>> make_balanced_batches(std::span<const std::size_t> clusters,
                                                            std::size_t batch_size, std::uint64_t seed,
                                                            std::uint64_t epoch) {
  if (batch_size < 4) throw ValidationError("batch_size must be at least 4");

  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < clusters.size(); ++i) members[clusters[i]].push_back(i);
  if (members.size() < 2) {
    throw ValidationError("training split has " + std::to_string(members.size()) +
                          " nonempty cluster(s); metric learning needs 2 or more, use a coarser cluster spec");
  }

  Rng rng(Rng::derive(seed, epoch));
  struct Pool {
    std::vector<std::size_t> items;
    std::size_t taken = 0;
  };
  std::vector<Pool> pools;
  for (auto& [_, items] : members) {
    rng.shuffle(items.begin(), items.end());
    pools.push_back({std::move(items), 0});
  }
  // Random priority breaks deficit ties.
  std::vector<std::size_t> order(pools.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  rng.shuffle(order.begin(), order.end());

  const auto n = static_cast<std::int64_t>(clusters.size());
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> batch_clusters;
  for (std::int64_t pos = 0; pos < n; ++pos) {
    if (batches.empty() || batches.back().size() == batch_size) {
      batches.emplace_back();
      batch_clusters.clear();
    }
    const auto batch_start = static_cast<std::int64_t>((batches.size() - 1) * batch_size);
    const bool last_slot = pos == std::min<std::int64_t>(batch_start + static_cast<std::int64_t>(batch_size), n) - 1;
    bool need_other = false;
    std::size_t only = 0;
    if (last_slot && !batch_clusters.empty()) {
      need_other = true;
      only = batch_clusters.front();
      for (auto c : batch_clusters) need_other &= c == only;
    }

    // deficit_c = (pos + 1) * |c| - taken_c * n, the shortfall against the
    // cluster's proportional share so far, scaled by n.
    auto pick = [&](bool exclude_only) -> std::optional<std::size_t> {
      std::optional<std::size_t> best;
      std::int64_t best_deficit = 0;
      for (auto c : order) {
        const auto& pool = pools[c];
        if (pool.taken == pool.items.size()) continue;
        if (exclude_only && c == only) continue;
        const std::int64_t deficit = (pos + 1) * static_cast<std::int64_t>(pool.items.size()) -
                                     static_cast<std::int64_t>(pool.taken) * n;
        if (!best || deficit > best_deficit) {
          best = c;
          best_deficit = deficit;
        }
      }
      return best;
    };
    std::optional<std::size_t> chosen = need_other ? pick(true) : std::nullopt;
    if (!chosen) chosen = pick(false);

    auto& pool = pools[*chosen];
    batches.back().push_back(pool.items[pool.taken++]);
    batch_clusters.push_back(*chosen);
  }
  return batches;
}

}  // namespace ptmvqa
