#pragma once
// Negative Poisson log-likelihood between traces and the symmetric
// max-of-both-directions distance used for clustering.
//
// For data a and model b (rates), over the ROI bins:
//   P(a|b) = sum_i [ -c_i ln m_i + m_i + lnGamma(c_i + 1) ]
// with counts c_i = max(a_i dt, 0) and expectations m_i = max(b_i dt, floor).

#include <cstddef>
#include <span>
#include <vector>

#include "shotsort/core.hpp"

namespace shotsort {

inline constexpr double kDefaultModelFloor = 1e-3;

double poisson_nll(std::span<const double> data, std::span<const double> model,
                   double dt_ns, BinRange bins, double model_floor);
double poisson_nll(const Trace& data, const Trace& model, const Roi& roi,
                   double model_floor = kDefaultModelFloor);

double sym_distance(std::span<const double> a, std::span<const double> b, double dt_ns,
                    BinRange bins, double model_floor);
double sym_distance(const Trace& a, const Trace& b, const Roi& roi,
                    double model_floor = kDefaultModelFloor);

// Dense symmetric matrix. The diagonal holds the computed self-distance.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double v) {
        values_[i * n_ + j] = v;
        values_[j * n_ + i] = v;
    }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values_).subspan(i * n_, n_);
    }

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
};

DistanceMatrix distance_matrix(const ShotSet& set, std::span<const std::size_t> members,
                               const Roi& roi, double model_floor = kDefaultModelFloor);

// Cumulative per-bin likelihood terms for every ordered member pair, so the
// distance matrix of any ROI costs O(n^2). Used by the ROI scan.
class PairwiseTermTable {
public:
    PairwiseTermTable(const ShotSet& set, std::span<const std::size_t> members,
                      double model_floor);

    std::size_t size() const { return n_; }
    // P(member i | member j) over bins.
    double directed(std::size_t i, std::size_t j, BinRange bins) const;
    DistanceMatrix matrix(BinRange bins) const;

private:
    std::size_t n_ = 0;
    std::size_t stride_ = 0;
    std::vector<double> prefix_;
};

} // namespace shotsort
