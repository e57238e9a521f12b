#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "lagns/grid.hpp"

namespace lagns::detail {

/// Precomputed per-mode data for a grid, shared read-only across threads.
struct GridTables {
    std::vector<double> k2;        ///< |k_int|^2 per spectral flat index
    std::vector<std::int16_t> shell; ///< shell id - j_min; -1 for k=0; -2 beyond j_max
    std::vector<std::int32_t> pad_map; ///< N-flat -> padded M-flat; -1 on the Nyquist plane
    int j_min = 0, j_max = 0;
    int M = 0;
};

inline const GridTables& grid_tables(const GridSpec& g) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, long long>, std::unique_ptr<GridTables>> cache;
    const auto key = std::make_tuple(g.n, g.N, static_cast<long long>(g.L * 1e12));
    std::scoped_lock lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return *it->second;

    auto t = std::make_unique<GridTables>();
    const std::size_t npts = g.points();
    t->k2.resize(npts);
    t->shell.resize(npts);
    t->pad_map.resize(npts);
    t->j_min = 0;
    t->j_max = static_cast<int>(std::floor(std::log2(g.N / 3.0)));
    t->M = 3 * g.N / 2;
    for (std::size_t flat = 0; flat < npts; ++flat) {
        auto idx = g.unflatten(flat);
        long k2i = 0;
        bool nyquist = false;
        std::size_t dst = 0;
        for (int a = 0; a < g.n; ++a) {
            const int k = g.freq_int(idx[a]);
            k2i += static_cast<long>(k) * k;
            if (k == -g.N / 2) nyquist = true;
            dst = dst * t->M + static_cast<std::size_t>(k >= 0 ? k : k + t->M);
        }
        t->k2[flat] = static_cast<double>(k2i);
        t->pad_map[flat] = nyquist ? -1 : static_cast<std::int32_t>(dst);
        if (k2i == 0) {
            t->shell[flat] = -1;
        } else {
            const int j = static_cast<int>(std::floor(0.5 * std::log2(static_cast<double>(k2i))));
            t->shell[flat] =
                j > t->j_max ? std::int16_t(-2) : static_cast<std::int16_t>(j - t->j_min);
        }
    }
    const GridTables& ref = *t;
    cache[key] = std::move(t);
    return ref;
}

} // namespace lagns::detail
