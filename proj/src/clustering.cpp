#include "shotsort/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shotsort/error.hpp"
#include "shotsort/parallel.hpp"
#include "shotsort/silhouette_detail.hpp"

namespace shotsort {

std::vector<std::vector<std::size_t>> Partition::clusters() const {
    std::vector<std::vector<std::size_t>> out(k);
    for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
    return out;
}

std::vector<std::size_t> Partition::sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (std::size_t c : assignment) ++out[c];
    return out;
}

std::vector<MergeStep> merge_sequence(const DistanceMatrix& dm, std::size_t k_target) {
    const std::size_t n = dm.size();
    if (k_target < 1 || k_target > n)
        throw InvalidParameter("agglomerate: k_target " + std::to_string(k_target) +
                               " outside [1, " + std::to_string(n) + "]");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> d(dm.row(0).data(), dm.row(0).data() + n * n);
    std::vector<char> active(n, 1);
    // nn[i]: nearest active j > i (smallest j on ties), best[i] its distance.
    std::vector<std::size_t> nn(n, n);
    std::vector<double> best(n, kInf);

    auto refresh = [&](std::size_t i) {
        nn[i] = n;
        best[i] = kInf;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!active[j]) continue;
            if (d[i * n + j] < best[i]) {
                best[i] = d[i * n + j];
                nn[i] = j;
            }
        }
    };
    for (std::size_t i = 0; i < n; ++i) refresh(i);

    std::vector<MergeStep> merges;
    merges.reserve(n - k_target);
    for (std::size_t step = 0; step + k_target < n; ++step) {
        std::size_t a = n;
        double dmin = kInf;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i] && nn[i] < n && best[i] < dmin) {
                dmin = best[i];
                a = i;
            }
        }
        if (a == n) {
            // Only infinite linkages remain; fall back to the first active pair.
            for (std::size_t i = 0; i < n && a == n; ++i)
                if (active[i]) a = i;
            std::size_t b = a + 1;
            while (!active[b]) ++b;
            nn[a] = b;
            dmin = d[a * n + b];
        }
        const std::size_t b = nn[a];
        merges.push_back(MergeStep{a, b, dmin});

        active[b] = 0;
        for (std::size_t x = 0; x < n; ++x) {
            if (!active[x] || x == a) continue;
            const double v = std::max(d[a * n + x], d[b * n + x]);
            d[a * n + x] = v;
            d[x * n + a] = v;
        }
        // Linkages to `a` only grow and `b` disappears, so only rows whose
        // nearest neighbour was a or b can change.
        for (std::size_t x = 0; x < n; ++x) {
            if (!active[x]) continue;
            if (x == a || nn[x] == a || nn[x] == b) refresh(x);
        }
    }
    return merges;
}

Partition partition_from_merges(std::size_t n, std::span<const MergeStep> merges,
                                std::size_t k) {
    if (k < 1 || k > n) throw InvalidParameter("partition: k outside [1, n]");
    if (merges.size() < n - k) throw InvalidParameter("partition: not enough merges for k");
    std::vector<std::size_t> root(n);
    std::iota(root.begin(), root.end(), 0);
    for (std::size_t s = 0; s < n - k; ++s)
        for (std::size_t& r : root)
            if (r == merges[s].absorbed) r = merges[s].keep;

    // Roots are the smallest member index of each cluster; rank them.
    std::vector<std::size_t> label(n, n);
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (root[i] == i) label[i] = next++;
    Partition p;
    p.k = next;
    p.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.assignment[i] = label[root[i]];
    return p;
}

Partition agglomerate(const DistanceMatrix& dm, std::size_t k_target) {
    const auto merges = merge_sequence(dm, k_target);
    return partition_from_merges(dm.size(), merges, k_target);
}

Trace cluster_model(const ShotSet& set, std::span<const std::size_t> members) {
    if (members.empty()) throw InvalidParameter("cluster_model: empty member list");
    check_members(set, members);
    std::vector<double> sum(set.n_samples(), 0.0);
    for (std::size_t m : members) {
        auto r = set.row(m);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += r[i];
    }
    const auto count = static_cast<double>(members.size());
    for (double& v : sum) v /= count;
    return Trace(set.axis(), std::move(sum));
}

double silhouette_value(double d_own, double d_other) {
    const double denom = std::max(d_own, d_other);
    if (!(denom > 0.0)) return 0.0;
    return std::clamp((d_other - d_own) / denom, -1.0, 1.0);
}

namespace detail {

namespace {
constexpr double kRelativeSpreadFloor = 1e-9;
}

SilhouetteReport score_silhouette(const Partition& partition,
                                  std::span<const double> d_own,
                                  std::span<const double> d_model, bool normalize) {
    const std::size_t n = partition.assignment.size();
    const std::size_t k = partition.k;
    const auto sizes = partition.sizes();

    std::vector<double> scale(k, 1.0);
    if (normalize) {
        std::vector<double> sum(k, 0.0), sq(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) sum[partition.assignment[i]] += d_own[i];
        for (std::size_t c = 0; c < k; ++c)
            if (sizes[c] > 0) sum[c] /= static_cast<double>(sizes[c]);
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = d_own[i] - sum[partition.assignment[i]];
            sq[partition.assignment[i]] += dev * dev;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] < 2) continue;
            const double sd = std::sqrt(sq[c] / static_cast<double>(sizes[c] - 1));
            // A spread at rounding level (e.g. the two members of a pair) counts as zero.
            if (sd > kRelativeSpreadFloor * std::abs(sum[c])) scale[c] = sd;
        }
    }

    SilhouetteReport rep;
    rep.per_member.assign(n, 0.0);
    rep.per_cluster_mean.assign(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = partition.assignment[i];
        if (sizes[own] < 2) continue;  // singleton convention: s = 0
        double other = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != own) other = std::min(other, d_model[i * k + c] / scale[c]);
        rep.per_member[i] = silhouette_value(d_own[i] / scale[own], other);
    }
    for (std::size_t i = 0; i < n; ++i)
        rep.per_cluster_mean[partition.assignment[i]] += rep.per_member[i];
    rep.quality = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        rep.per_cluster_mean[c] /= static_cast<double>(sizes[c]);
        rep.quality = std::min(rep.quality, rep.per_cluster_mean[c]);
    }
    return rep;
}

void check_silhouette_partition(const Partition& partition, std::size_t n_members) {
    if (partition.k < 2) throw InvalidParameter("silhouette: need at least 2 clusters");
    if (partition.assignment.size() != n_members)
        throw InvalidParameter("silhouette: partition does not cover the members");
    const auto sizes = partition.sizes();
    for (std::size_t c = 0; c < partition.k; ++c)
        if (sizes[c] == 0) throw InvalidParameter("silhouette: empty cluster in partition");
    for (std::size_t c : partition.assignment)
        if (c >= partition.k) throw InvalidParameter("silhouette: cluster id out of range");
}

} // namespace detail

SilhouetteReport silhouette(const ShotSet& set, std::span<const std::size_t> members,
                            const Partition& partition, const Roi& roi, double model_floor,
                            bool normalize) {
    detail::check_silhouette_partition(partition, members.size());
    check_members(set, members);
    const BinRange bins = roi.bins(set.axis());
    const double dt = set.axis().dt_ns;
    const std::size_t n = members.size();
    const std::size_t k = partition.k;
    const std::size_t len = set.n_samples();

    const auto clusters = partition.clusters();
    std::vector<std::vector<double>> sums(k, std::vector<double>(len, 0.0));
    std::vector<std::vector<double>> means(k);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t local : clusters[c]) {
            auto r = set.row(members[local]);
            for (std::size_t b = 0; b < len; ++b) sums[c][b] += r[b];
        }
        means[c] = sums[c];
        for (double& v : means[c]) v /= static_cast<double>(clusters[c].size());
    }

    std::vector<double> d_own(n, 0.0), d_model(n * k, 0.0);
    parallel::for_each_index(n, [&](std::size_t i) {
        auto shot = set.row(members[i]);
        const std::size_t own = partition.assignment[i];
        const std::size_t m = clusters[own].size();
        if (m >= 2) {
            std::vector<double> loo(len);
            for (std::size_t b = 0; b < len; ++b)
                loo[b] = (sums[own][b] - shot[b]) / static_cast<double>(m - 1);
            d_own[i] = sym_distance(shot, loo, dt, bins, model_floor);
        }
        for (std::size_t c = 0; c < k; ++c)
            if (c != own) d_model[i * k + c] = sym_distance(shot, means[c], dt, bins, model_floor);
    });
    return detail::score_silhouette(partition, d_own, d_model, normalize);
}

ClusterCountSelection select_num_clusters(const ShotSet& set,
                                          std::span<const std::size_t> members,
                                          const Roi& roi, std::size_t k_max,
                                          double model_floor, bool normalize) {
    if (k_max < 2 || k_max + 1 > members.size())
        throw InvalidParameter("select_num_clusters: k_max must lie in [2, members - 1]");
    const DistanceMatrix dm = distance_matrix(set, members, roi, model_floor);
    const auto merges = merge_sequence(dm, 2);

    ClusterCountSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 2; k <= k_max; ++k) {
        Partition p = partition_from_merges(members.size(), merges, k);
        const auto rep = silhouette(set, members, p, roi, model_floor, normalize);
        sel.quality.push_back(rep.quality);
        sel.partitions.push_back(std::move(p));
        if (rep.quality > best) {  // strict: ties keep the smaller k
            best = rep.quality;
            sel.k_best = k;
        }
    }
    return sel;
}

} // namespace shotsort
