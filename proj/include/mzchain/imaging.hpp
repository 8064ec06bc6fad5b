#pragma once

// Spatially inhomogeneous objects under the sub-beam approximation: each pixel is an
// independent object seen by its own copy of the chain.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mzchain/analysis.hpp"
#include "mzchain/core.hpp"
#include "mzchain/format.hpp"

namespace mzchain::imaging {

/// Row-major grid of per-pixel transmissivities.
struct TransmissivityMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }

    void validate() const {
        if (width == 0 || height == 0) throw FormatError("map must have at least one pixel");
        if (values.size() != width * height)
            throw FormatError("map has " + std::to_string(values.size()) + " values for " +
                              std::to_string(width) + "x" + std::to_string(height) + " pixels");
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!(values[i] >= 0.0 && values[i] <= 1.0))
                throw FormatError("transmissivity " + std::to_string(values[i]) + " outside [0,1]",
                                  i / width + 1, i % width + 1);
    }
};

/// Absorbed dose per pixel, in the same units as the input intensity I0 = |alpha_0|^2.
struct DoseMap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;
    int n_steps = 1;
    double phi = pi;
    double input_intensity = 1.0;

    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

enum class MapFormat { csv, pgm };

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_real(std::string_view token, std::size_t row, std::size_t column) {
    token = trim(token);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || end != token.data() + token.size())
        throw FormatError("cannot parse '" + std::string(token) + "' as a number", row, column);
    return value;
}

// Whitespace-separated header token of a PGM file, skipping '#' comments.
inline std::string pgm_token(std::istream& in) {
    std::string token;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            if (!token.empty()) break;
            continue;
        }
        if (std::isspace(ch)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(ch));
    }
    return token;
}

inline std::size_t pgm_unsigned(std::istream& in, const char* what) {
    const std::string token = pgm_token(in);
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || end != token.data() + token.size())
        throw FormatError(std::string("PGM header: cannot parse ") + what + " from '" + token + "'");
    return value;
}

}  // namespace detail

/// Comma-separated rows of reals in [0,1]. Blank lines and lines starting with '#' are skipped.
inline TransmissivityMap parse_csv_map(std::istream& in) {
    TransmissivityMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;

        std::vector<double> row;
        std::size_t column = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = text.find(',', start);
            const auto token = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
            ++column;
            const double eta = detail::parse_real(token, line_no, column);
            if (!(eta >= 0.0 && eta <= 1.0))
                throw FormatError("transmissivity " + std::string(detail::trim(token)) + " outside [0,1]",
                                  line_no, column);
            row.push_back(eta);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (map.height == 0)
            map.width = row.size();
        else if (row.size() != map.width)
            throw FormatError("ragged row: " + std::to_string(row.size()) + " values, expected " +
                              std::to_string(map.width),
                              line_no);
        map.values.insert(map.values.end(), row.begin(), row.end());
        ++map.height;
    }
    if (map.height == 0) throw FormatError("CSV map contains no rows");
    return map;
}

/// Binary (P5) or plain (P2) graymap; pixel v maps to eta = v / maxval.
inline TransmissivityMap parse_pgm_map(std::istream& in) {
    const std::string magic = detail::pgm_token(in);
    if (magic != "P2" && magic != "P5") throw FormatError("not a PGM file (magic '" + magic + "')");
    TransmissivityMap map;
    map.width = detail::pgm_unsigned(in, "width");
    map.height = detail::pgm_unsigned(in, "height");
    const std::size_t maxval = detail::pgm_unsigned(in, "maxval");
    if (map.width == 0 || map.height == 0) throw FormatError("PGM has zero size");
    if (maxval == 0 || maxval > 65535) throw FormatError("PGM maxval must be in [1, 65535]");

    map.values.resize(map.width * map.height);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const std::size_t row = i / map.width + 1, column = i % map.width + 1;
        std::size_t v = 0;
        if (magic == "P2") {
            const std::string token = detail::pgm_token(in);
            if (token.empty()) throw FormatError("PGM ends early", row, column);
            const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc{} || end != token.data() + token.size())
                throw FormatError("cannot parse pixel '" + token + "'", row, column);
        } else {
            const int bytes = maxval < 256 ? 1 : 2;
            for (int b = 0; b < bytes; ++b) {
                const int ch = in.get();
                if (ch == EOF) throw FormatError("PGM ends early", row, column);
                v = (v << 8) | static_cast<std::size_t>(ch);
            }
        }
        if (v > maxval)
            throw FormatError("pixel " + std::to_string(v) + " exceeds maxval " + std::to_string(maxval), row,
                              column);
        map.values[i] = double(v) / double(maxval);
    }
    return map;
}

inline MapFormat format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" ? MapFormat::pgm : MapFormat::csv;
}

inline TransmissivityMap load_map(const std::filesystem::path& path, MapFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open map file '" + path.string() + "'");
    TransmissivityMap map = format == MapFormat::pgm ? parse_pgm_map(in) : parse_csv_map(in);
    map.validate();
    return map;
}

inline TransmissivityMap load_map(const std::filesystem::path& path) {
    return load_map(path, format_from_path(path));
}

/// dose[p] = r(eta[p]) * |alpha_0|^2, pixel by pixel.
inline DoseMap irradiate(const TransmissivityMap& map, const ChainConfig& config) {
    map.validate();
    DoseMap dose{map.width, map.height, {}, config.n_steps(), config.phi(), config.input_intensity()};
    dose.values.resize(map.values.size());
    std::transform(map.values.begin(), map.values.end(), dose.values.begin(),
                   [&](double eta) { return absorbed_fraction(config, eta) * dose.input_intensity; });
    return dose;
}

inline constexpr double default_band = 0.02;

/// Mean dose over pixels within `band` of eta_bar divided by the mean dose elsewhere.
inline double selectivity(const TransmissivityMap& map, const std::vector<double>& dose, double eta_bar,
                          double band = default_band) {
    double inside = 0.0, outside = 0.0;
    std::size_t n_inside = 0, n_outside = 0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (std::abs(map.values[i] - eta_bar) <= band) {
            inside += dose[i];
            ++n_inside;
        } else {
            outside += dose[i];
            ++n_outside;
        }
    }
    if (n_inside == 0) throw BandError("no pixel lies within the target band around " + std::to_string(eta_bar));
    if (n_outside == 0) throw BandError("every pixel lies within the target band; no background to compare");
    const double mean_outside = outside / double(n_outside);
    const double mean_inside = inside / double(n_inside);
    if (mean_outside == 0.0) return mean_inside == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return mean_inside / mean_outside;
}

struct SelectivePlan {
    analysis::TuneResult tune;
    DoseMap dose;
    double selectivity = 0.0;
    /// Same ratio under a single direct pass (dose = 1 - eta), for comparison.
    double direct_selectivity = 0.0;
};

inline SelectivePlan selective_plan(const TransmissivityMap& map, double eta_bar, int n_max,
                                    double band = default_band,
                                    int grid_points = analysis::default_grid_points) {
    map.validate();
    if (!(band >= 0.0)) throw DomainError("band must be >= 0");
    SelectivePlan plan;
    plan.tune = analysis::tune_for_target(eta_bar, n_max, grid_points);
    plan.dose = irradiate(map, ChainConfig::pi_over_n(plan.tune.n_steps));
    plan.selectivity = selectivity(map, plan.dose.values, eta_bar, band);
    plan.direct_selectivity = selectivity(map, irradiate(map, ChainConfig(pi, 1)).values, eta_bar, band);
    return plan;
}

inline void write_dose_csv(std::ostream& out, const DoseMap& dose) {
    out << "# N=" << dose.n_steps << " phi=" << format_number(dose.phi) << '\n';
    out << "# I0=" << format_number(dose.input_intensity) << '\n';
    for (std::size_t y = 0; y < dose.height; ++y) {
        for (std::size_t x = 0; x < dose.width; ++x) {
            if (x) out << ',';
            out << format_number(dose.at(x, y));
        }
        out << '\n';
    }
}

/// Plain PGM with dose/I0 quantised to 0..255. Lossy.
inline void write_dose_pgm(std::ostream& out, const DoseMap& dose) {
    out << "P2\n# N=" << dose.n_steps << " phi=" << format_number(dose.phi)
        << " I0=" << format_number(dose.input_intensity) << '\n';
    out << dose.width << ' ' << dose.height << "\n255\n";
    for (std::size_t y = 0; y < dose.height; ++y) {
        for (std::size_t x = 0; x < dose.width; ++x) {
            const double level = std::clamp(dose.at(x, y) / dose.input_intensity, 0.0, 1.0);
            if (x) out << ' ';
            out << static_cast<int>(std::lround(255.0 * level));
        }
        out << '\n';
    }
}

}  // namespace mzchain::imaging
