#include "shotsort/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shotsort/error.hpp"

namespace shotsort {

std::vector<double> default_photon_edges() {
    return {0, 10, 20, 30, 50, 75, 100, 150, 200, std::numeric_limits<double>::infinity()};
}

std::vector<double> integrated_photons(const ShotSet& set) {
    std::vector<double> out(set.n_shots());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto r = set.row(i);
        out[i] = std::accumulate(r.begin(), r.end(), 0.0) * set.axis().dt_ns;
    }
    return out;
}

namespace {

// Maximises matched counts over injective class -> label maps. Exhaustive up
// to 8 x 8; greedy majority beyond that.
std::vector<std::size_t> best_mapping(const std::vector<std::vector<std::size_t>>& confusion,
                                      std::size_t n_labels) {
    const std::size_t k = confusion.size();
    const std::size_t m = std::max(k, n_labels);
    std::vector<std::size_t> mapping(k, n_labels);
    if (m <= 8) {
        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::size_t best = 0;
        bool first = true;
        do {
            std::size_t total = 0;
            for (std::size_t c = 0; c < k; ++c)
                if (perm[c] < n_labels) total += confusion[c][perm[c]];
            if (first || total > best) {
                best = total;
                first = false;
                for (std::size_t c = 0; c < k; ++c)
                    mapping[c] = perm[c] < n_labels ? perm[c] : n_labels;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return mapping;
    }
    std::vector<bool> used(n_labels, false);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t best = n_labels;
        for (std::size_t l = 0; l < n_labels; ++l)
            if (!used[l] && (best == n_labels || confusion[c][l] > confusion[c][best])) best = l;
        if (best < n_labels) used[best] = true;
        mapping[c] = best;
    }
    return mapping;
}

} // namespace

LabelEvaluation evaluate_against_labels(const ShotSet& set,
                                        std::span<const std::size_t> assignment,
                                        std::span<const double> photons,
                                        std::span<const double> edges) {
    if (!set.labels()) throw InvalidParameter("evaluate: the shot set carries no labels");
    if (assignment.size() != set.n_shots() || photons.size() != set.n_shots())
        throw InvalidParameter("evaluate: assignment or photon list length differs from shot count");
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()))
        throw InvalidParameter("evaluate: photon bin edges must be ascending");
    const auto& labels = *set.labels();

    LabelEvaluation ev;
    ev.n_shots = set.n_shots();
    std::size_t k = 0, n_labels = 0;
    for (std::size_t a : assignment) k = std::max(k, a + 1);
    for (auto l : labels) n_labels = std::max<std::size_t>(n_labels, l + 1u);
    ev.confusion.assign(k, std::vector<std::size_t>(n_labels, 0));
    for (std::size_t i = 0; i < assignment.size(); ++i) ++ev.confusion[assignment[i]][labels[i]];
    ev.mapping = best_mapping(ev.confusion, n_labels);

    for (std::size_t b = 0; b + 1 < edges.size(); ++b)
        ev.photon_bins.push_back(PhotonBinAccuracy{edges[b], edges[b + 1], 0, 0, 0.0});
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        const bool ok = ev.mapping[assignment[i]] == labels[i];
        if (ok) ++ev.correct;
        const auto it = std::upper_bound(edges.begin(), edges.end(), photons[i]);
        if (it == edges.begin() || it == edges.end()) continue;
        auto& bin = ev.photon_bins[static_cast<std::size_t>(it - edges.begin()) - 1];
        ++bin.n;
        if (ok) ++bin.correct;
    }
    for (auto& bin : ev.photon_bins)
        bin.accuracy = bin.n ? static_cast<double>(bin.correct) / static_cast<double>(bin.n)
                             : std::numeric_limits<double>::quiet_NaN();
    ev.accuracy = ev.n_shots ? static_cast<double>(ev.correct) / static_cast<double>(ev.n_shots) : 0.0;
    return ev;
}

LabelEvaluation evaluate_against_labels(const ShotSet& set,
                                        std::span<const std::size_t> assignment) {
    const auto photons = integrated_photons(set);
    const auto edges = default_photon_edges();
    return evaluate_against_labels(set, assignment, photons, edges);
}

double accuracy_above(const LabelEvaluation& eval, std::span<const std::size_t> assignment,
                      std::span<const std::uint8_t> labels, std::span<const double> photons,
                      double threshold) {
    std::size_t n = 0, ok = 0;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (photons[i] < threshold) continue;
        ++n;
        if (eval.mapping[assignment[i]] == labels[i]) ++ok;
    }
    return n ? static_cast<double>(ok) / static_cast<double>(n)
             : std::numeric_limits<double>::quiet_NaN();
}

} // namespace shotsort
