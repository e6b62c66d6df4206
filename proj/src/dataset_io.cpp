#include "shotsort/dataset_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "shotsort/error.hpp"

namespace shotsort {

namespace {

using ojson = nlohmann::ordered_json;

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

std::uint32_t from_little_endian(std::uint32_t v) { return to_little_endian(v); }

std::uintmax_t file_size_or_throw(const std::string& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError(path, "cannot stat file: " + ec.message());
    return size;
}

} // namespace

std::string encode_bundle_header(const BundleHeader& h) {
    ojson j;
    j["magic"] = h.magic;
    j["n_shots"] = h.n_shots;
    j["n_samples"] = h.n_samples;
    j["t0_ns"] = h.t0_ns;
    j["dt_ns"] = h.dt_ns;
    j["has_labels"] = h.has_labels;
    ojson meta = ojson::object();
    for (const auto& [k, v] : h.meta) meta[k] = v;  // std::map iterates sorted
    j["meta"] = meta;
    return j.dump();
}

void write_bundle(const ShotSet& set, const std::string& path) {
    BundleHeader h;
    h.n_shots = set.n_shots();
    h.n_samples = set.n_samples();
    h.t0_ns = set.axis().t0_ns;
    h.dt_ns = set.axis().dt_ns;
    h.has_labels = set.labels().has_value();
    h.meta = set.meta();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    const std::string header = encode_bundle_header(h);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.put('\n');

    std::vector<std::uint32_t> payload(set.data().size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        const auto f = static_cast<float>(set.data()[i]);
        payload[i] = to_little_endian(std::bit_cast<std::uint32_t>(f));
    }
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(std::uint32_t)));
    if (set.labels()) {
        const auto& l = *set.labels();
        out.write(reinterpret_cast<const char*>(l.data()), static_cast<std::streamsize>(l.size()));
    }
    out.flush();
    if (!out) throw IoError(path, "write failed");
}

namespace {

BundleHeader parse_header(const std::string& path, std::ifstream& in, std::size_t& header_bytes) {
    std::string line;
    if (!std::getline(in, line) || in.eof())
        throw FormatError(path, "missing newline-terminated JSON header");
    header_bytes = line.size() + 1;

    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path, std::string("header is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("magic") || !j["magic"].is_string() ||
        j["magic"].get<std::string>() != kBundleMagic)
        throw FormatError(path, std::string("bad magic, expected \"") + kBundleMagic + "\"");

    BundleHeader h;
    try {
        h.magic = j.at("magic").get<std::string>();
        const auto shots = j.at("n_shots").get<std::int64_t>();
        const auto samples = j.at("n_samples").get<std::int64_t>();
        if (shots <= 0 || samples <= 0) throw FormatError(path, "dimensions must be positive");
        h.n_shots = static_cast<std::size_t>(shots);
        h.n_samples = static_cast<std::size_t>(samples);
        h.t0_ns = j.at("t0_ns").get<double>();
        h.dt_ns = j.at("dt_ns").get<double>();
        h.has_labels = j.at("has_labels").get<bool>();
        if (j.contains("meta")) {
            for (const auto& [k, v] : j["meta"].items()) h.meta[k] = v.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path, std::string("malformed header field: ") + e.what());
    }
    if (!(h.dt_ns > 0.0) || h.n_samples < 2)
        throw FormatError(path, "invalid time axis in header");
    return h;
}

} // namespace

BundleHeader read_bundle_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::size_t header_bytes = 0;
    return parse_header(path, in, header_bytes);
}

ShotSet read_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::size_t header_bytes = 0;
    const BundleHeader h = parse_header(path, in, header_bytes);

    const std::uintmax_t values = static_cast<std::uintmax_t>(h.n_shots) * h.n_samples;
    const std::uintmax_t expected =
        header_bytes + values * 4 + (h.has_labels ? h.n_shots : 0);
    const std::uintmax_t actual = file_size_or_throw(path);
    if (actual != expected)
        throw FormatError(path, "payload size mismatch: expected " + std::to_string(expected) +
                                    " bytes, found " + std::to_string(actual));

    std::vector<std::uint32_t> raw(static_cast<std::size_t>(values));
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
    if (!in) throw FormatError(path, "truncated payload");
    std::vector<double> data(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const float f = std::bit_cast<float>(from_little_endian(raw[i]));
        if (!std::isfinite(f)) throw FormatError(path, "non-finite sample in payload");
        data[i] = f;
    }

    ShotSet set(TimeAxis::make(h.t0_ns, h.dt_ns, h.n_samples), h.n_shots, std::move(data));
    if (h.has_labels) {
        std::vector<std::uint8_t> labels(h.n_shots);
        in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
        if (!in) throw FormatError(path, "truncated label block");
        set.set_labels(std::move(labels));
    }
    set.meta() = h.meta;
    return set;
}

ShotSet blind_labels(const ShotSet& set) {
    ShotSet out = set;
    out.clear_labels();
    return out;
}

ShotSet unblind_labels(const ShotSet& set, std::vector<std::uint8_t> labels) {
    ShotSet out = set;
    out.set_labels(std::move(labels));
    return out;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void export_curves(std::span<const Curve> curves, const std::string& path) {
    if (curves.empty()) throw InvalidParameter("export_curves: no curves");
    const TimeAxis& axis = curves.front().values.axis();
    for (const auto& c : curves) {
        if (!(c.values.axis() == axis))
            throw InvalidParameter("export_curves: curve '" + c.name + "' has a different axis");
        if (c.sigma && c.sigma->size() != c.values.size())
            throw InvalidParameter("export_curves: sigma length mismatch for '" + c.name + "'");
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out << "time_ns";
    for (const auto& c : curves) {
        out << ',' << c.name;
        if (c.sigma) out << ',' << c.name << "_sigma";
    }
    out << '\n';
    for (std::size_t i = 0; i < axis.n_samples; ++i) {
        out << format_number(axis.time(i));
        for (const auto& c : curves) {
            out << ',' << format_number(c.values[i]);
            if (c.sigma) out << ',' << format_number((*c.sigma)[i]);
        }
        out << '\n';
    }
    if (!out) throw IoError(path, "write failed");
}

} // namespace shotsort
