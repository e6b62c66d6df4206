#pragma once
// Direct complete linkage: every inter-cluster maximum recomputed at every
// step. Slow, but shares nothing with the library implementation.

#include <limits>
#include <map>
#include <random>
#include <vector>

#include "shotsort/clustering.hpp"

namespace testutil {

inline std::vector<shotsort::MergeStep> reference_merges(const shotsort::DistanceMatrix& dm,
                                                         std::size_t k_target) {
    std::map<std::size_t, std::vector<std::size_t>> clusters;  // keyed by smallest member
    for (std::size_t i = 0; i < dm.size(); ++i) clusters[i] = {i};
    std::vector<shotsort::MergeStep> out;
    while (clusters.size() > k_target) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t ba = 0, bb = 0;
        for (auto a = clusters.begin(); a != clusters.end(); ++a)
            for (auto b = std::next(a); b != clusters.end(); ++b) {
                double link = -std::numeric_limits<double>::infinity();
                for (std::size_t x : a->second)
                    for (std::size_t y : b->second) link = std::max(link, dm(x, y));
                if (link < best) {  // map order visits (first, second) ascending
                    best = link;
                    ba = a->first;
                    bb = b->first;
                }
            }
        auto& keep = clusters[ba];
        keep.insert(keep.end(), clusters[bb].begin(), clusters[bb].end());
        clusters.erase(bb);
        out.push_back(shotsort::MergeStep{ba, bb, best});
    }
    return out;
}

inline shotsort::DistanceMatrix random_matrix(std::mt19937_64& rng, std::size_t n,
                                              bool integer_valued) {
    shotsort::DistanceMatrix dm(n);
    std::uniform_int_distribution<int> iv(0, 4);
    std::uniform_real_distribution<double> rv(0.0, 10.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) dm.set(i, j, integer_valued ? iv(rng) : rv(rng));
    return dm;
}

} // namespace testutil
