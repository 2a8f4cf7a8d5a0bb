#pragma once

// Output formats: curve CSV, profile / direction / alignment JSON and the
// SVG report. JSON objects use std::map storage, so keys come out sorted.

#include "caz/analysis.hpp"
#include "caz/detection.hpp"
#include "caz/error.hpp"
#include "caz/extraction.hpp"
#include "caz/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace caz {

// Fixed-point text with at least 9 significant digits.
inline std::string format_decimal(double x) {
    int decimals = 9;
    if (x != 0.0 && std::isfinite(x)) decimals = std::clamp(8 - static_cast<int>(std::floor(std::log10(std::abs(x)))), 9, 340);
    char buf[512];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, decimals);
    return std::string(buf, res.ptr);
}

inline std::string metrics_csv(const LayerMetrics& m) {
    std::string out = "layer,separation,coherence,velocity,directional_stability\n";
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        out += std::to_string(l);
        for (double v : {m.separation[l], m.coherence[l], m.velocity[l], m.directional_stability[l]}) {
            out += ',';
            out += format_decimal(v);
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json to_json(const DetectionSettings& s) {
    return {{"prominence_floor_fraction", s.prominence_floor_fraction},
            {"valley_merge_fraction", s.valley_merge_fraction},
            {"embedding_boundary_layer", s.embedding_boundary_layer},
            {"sustain_layers", s.sustain_layers}};
}

inline nlohmann::json to_json(const CazRegion& r) {
    return {{"start", r.start_layer},
            {"peak", r.peak_layer},
            {"end", r.end_layer},
            {"width", r.width()},
            {"peak_separation", r.peak_separation},
            {"peak_coherence", r.peak_coherence},
            {"prominence", r.prominence},
            {"score", r.score},
            {"strength", std::string(to_string(r.strength))},
            {"kind", std::string(to_string(r.kind))},
            {"rise_fall_asymmetry", r.rise_fall_asymmetry}};
}

inline nlohmann::json to_json(const CazProfile& p) {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : p.regions) regions.push_back(to_json(r));
    return {{"n_regions", p.n_regions()},
            {"peak_region_index", p.peak_region_index},
            {"settings", to_json(p.settings)},
            {"regions", std::move(regions)}};
}

inline nlohmann::json to_json(const ConceptDirection& d) {
    return {{"method", std::string(to_string(d.method))},
            {"source_layers", {d.source_layers.first, d.source_layers.second}},
            {"concept_name", d.concept_name},
            {"model_name", d.model_name},
            {"vector", std::vector<double>(d.vector.data(), d.vector.data() + d.vector.size())}};
}

inline nlohmann::json to_json(const AlignmentReport& a) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& f : a.per_fraction)
        per.push_back({{"fraction", f.fraction},
                       {"layer_a", f.layer_a},
                       {"layer_b", f.layer_b},
                       {"matched", f.matched},
                       {"mismatched", f.mismatched}});
    return {{"matched_mean", a.matched_mean}, {"mismatched_mean", a.mismatched_mean},
            {"delta", a.delta},               {"n_valid", a.n_valid},
            {"n_excluded", a.n_excluded},     {"per_fraction", std::move(per)}};
}

// Newline-terminated, key-sorted JSON text.
inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Calibration directions: either a JSON array of numeric rows or an array of
// direction objects carrying a "vector" field (the extract output format).
inline Matrix direction_rows_from_json(const nlohmann::json& j) {
    const auto& items = j.is_object() && j.contains("directions") ? j.at("directions") : j;
    if (!items.is_array() || items.empty()) throw Error(ErrorKind::Format, "calibration file: expected a non-empty array");
    std::vector<std::vector<double>> rows;
    try {
        for (const auto& it : items) rows.push_back(it.is_object() ? it.at("vector").get<std::vector<double>>()
                                                                   : it.get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("calibration file: ") + e.what());
    }
    const auto d = rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) throw Error(ErrorKind::Format, "calibration file: rows differ in length");
        for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
    return m;
}

inline std::string xml_escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

// Self-contained SVG: S, C and v as polylines, one shaded band per region,
// a marker on every peak.
inline std::string svg_report(const LayerMetrics& m, const CazProfile* profile, const std::string& title) {
    constexpr double W = 800, H = 420, left = 60, right = 150, top = 40, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    const auto n = m.n_layers();
    auto x_of = [&](double l) { return left + (n > 1 ? l / static_cast<double>(n - 1) : 0.0) * pw; };

    // Each curve gets its own vertical scale so all three are readable.
    struct Series {
        const Curve* c;
        const char* label;
        const char* color;
    };
    const Series series[] = {{&m.separation, "S(l) separation", "#1f77b4"},
                             {&m.coherence, "C(l) coherence", "#2ca02c"},
                             {&m.velocity, "v(l) velocity", "#d62728"}};

    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << xml_escape(title) << "</text>\n";

    if (profile) {
        for (std::size_t i = 0; i < profile->regions.size(); ++i) {
            const auto& r = profile->regions[i];
            os << "<rect class=\"region\" x=\"" << x_of(static_cast<double>(r.start_layer)) << "\" y=\"" << top
               << "\" width=\"" << std::max(1.0, x_of(static_cast<double>(r.end_layer)) - x_of(static_cast<double>(r.start_layer)))
               << "\" height=\"" << ph << "\" fill=\"" << (i % 2 ? "#ff7f0e" : "#9467bd")
               << "\" fill-opacity=\"0.12\"><title>region " << i << " (" << to_string(r.strength) << ", "
               << to_string(r.kind) << ")</title></rect>\n";
        }
    }
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";

    for (std::size_t si = 0; si < std::size(series); ++si) {
        const auto& c = *series[si].c;
        const auto [lo_it, hi_it] = std::minmax_element(c.begin(), c.end());
        const double lo = std::min(0.0, *lo_it), hi = *hi_it > lo ? *hi_it : lo + 1.0;
        auto y_of = [&](double v) { return top + ph - (v - lo) / (hi - lo) * ph; };
        os << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << series[si].color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t l = 0; l < n; ++l) os << (l ? " " : "") << x_of(static_cast<double>(l)) << ',' << y_of(c[l]);
        os << "\"><title>" << series[si].label << "</title></polyline>\n";
        const double ly = top + 20.0 + 22.0 * static_cast<double>(si);
        os << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
           << "\" stroke=\"" << series[si].color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - right + 35 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
           << series[si].label << "</text>\n";
        if (si == 0 && profile) {
            for (const auto& r : profile->regions)
                os << "<circle class=\"peak\" cx=\"" << x_of(static_cast<double>(r.peak_layer)) << "\" cy=\""
                   << y_of(c[r.peak_layer]) << "\" r=\"4\" fill=\"" << series[0].color << "\"/>\n";
        }
    }
    os << "<text x=\"" << left + pw / 2 - 20 << "\" y=\"" << H - 12 << "\" font-family=\"sans-serif\" font-size=\"12\">layer</text>\n";
    for (std::size_t l = 0; l < n; l += std::max<std::size_t>(1, n / 12))
        os << "<text x=\"" << x_of(static_cast<double>(l)) - 4 << "\" y=\"" << top + ph + 16
           << "\" font-family=\"sans-serif\" font-size=\"10\">" << l << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

} // namespace caz
