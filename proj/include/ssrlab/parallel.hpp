#pragma once

#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

namespace ssrlab {

/// Number of workers: explicit request, else the SSRLAB_WORKERS environment
/// variable, else the machine's logical core count.
int resolve_workers(std::optional<int> requested);

inline constexpr std::uint64_t kUnitsPerBlock = 1024;

/// Deterministic block-parallel fold over `n_units` work items.
///
/// Units are grouped into fixed-size blocks; workers own blocks round-robin
/// by block index, each block is folded sequentially in unit order into its
/// own accumulator slot, and the slots are combined by a fixed pairwise tree.
/// The result is therefore bit-identical for any worker count.
///
/// Acc: default-constructible, with merge(const Acc&).
/// UnitFn: void(std::uint64_t unit_index, Acc& acc), called from one worker
/// at a time per accumulator; must not touch shared mutable state.
template <typename Acc, typename UnitFn>
Acc parallel_fold(std::uint64_t n_units, int workers, UnitFn&& fn) {
    if (n_units == 0) return Acc{};
    const std::uint64_t n_blocks = (n_units + kUnitsPerBlock - 1) / kUnitsPerBlock;
    std::vector<Acc> slots(n_blocks);

    auto run_block = [&](std::uint64_t b) {
        const std::uint64_t lo = b * kUnitsPerBlock;
        const std::uint64_t hi = std::min(n_units, lo + kUnitsPerBlock);
        for (std::uint64_t u = lo; u < hi; ++u) fn(u, slots[b]);
    };

    const int w = std::max(1, std::min<int>(workers, static_cast<int>(n_blocks)));
    if (w == 1) {
        for (std::uint64_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(w);
        for (int t = 0; t < w; ++t) {
            pool.emplace_back([&, t] {
                for (std::uint64_t b = t; b < n_blocks; b += w) run_block(b);
            });
        }
        for (auto& th : pool) th.join();
    }

    // fixed pairwise tree over block slots
    std::uint64_t m = n_blocks;
    while (m > 1) {
        const std::uint64_t half = m / 2;
        for (std::uint64_t i = 0; i < half; ++i) {
            slots[2 * i].merge(slots[2 * i + 1]);
            if (i != 2 * i) slots[i] = std::move(slots[2 * i]);
        }
        if (m % 2 == 1) slots[half] = std::move(slots[m - 1]);
        m = half + (m % 2);
    }
    return std::move(slots[0]);
}

}  // namespace ssrlab
