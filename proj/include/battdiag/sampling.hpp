#pragma once

#include <vector>

#include "battdiag/rng.hpp"

namespace battdiag {

// n Latin-hypercube points in [0,1)^d: every dimension is cut into n equal
// bins and receives exactly one sample per bin, with an independent random
// bin permutation per dimension.
inline std::vector<std::vector<double>> latin_hypercube(Rng& rng, int n, int d) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(d, 0.0));
    std::vector<int> bins(n);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < n; ++i) bins[i] = i;
        rng.shuffle(bins);
        for (int i = 0; i < n; ++i)
            pts[i][j] = (bins[i] + rng.uniform01()) / n;
    }
    return pts;
}

}  // namespace battdiag
