#pragma once
// Shot bundle files and CSV curve export.
//
// Bundle layout:
//   1. one UTF-8 JSON header line terminated by '\n':
//      {"magic":"SHOTSORT1","n_shots":..,"n_samples":..,"t0_ns":..,"dt_ns":..,
//       "has_labels":..,"meta":{..keys sorted..}}
//   2. n_shots * n_samples little-endian float32 values, row-major
//   3. when has_labels, one unsigned byte per shot

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shotsort/core.hpp"

namespace shotsort {

inline constexpr const char* kBundleMagic = "SHOTSORT1";

struct BundleHeader {
    std::string magic = kBundleMagic;
    std::size_t n_shots = 0;
    std::size_t n_samples = 0;
    double t0_ns = 0.0;
    double dt_ns = 0.0;
    bool has_labels = false;
    Meta meta;
};

std::string encode_bundle_header(const BundleHeader& header);

void write_bundle(const ShotSet& set, const std::string& path);
ShotSet read_bundle(const std::string& path);
BundleHeader read_bundle_header(const std::string& path);

ShotSet blind_labels(const ShotSet& set);
ShotSet unblind_labels(const ShotSet& set, std::vector<std::uint8_t> labels);

struct Curve {
    std::string name;
    Trace values;
    std::optional<std::vector<double>> sigma;
};

// CSV: time_ns, then <name>[,<name>_sigma] per curve; 9 significant digits.
void export_curves(std::span<const Curve> curves, const std::string& path);

// "%.9g" formatting used by every CSV writer.
std::string format_number(double v);

} // namespace shotsort
