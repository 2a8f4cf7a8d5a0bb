#pragma once

// CAZ boundary detection: the velocity-based single-region detector and the
// scored multi-region profile detector.

#include "caz/error.hpp"
#include "caz/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string_view>
#include <vector>

namespace caz {

enum class Strength { Major, Strong, Moderate, Gentle };
enum class RegionKind { Embedding, Active };

constexpr std::string_view to_string(Strength s) noexcept {
    switch (s) {
    case Strength::Major: return "major";
    case Strength::Strong: return "strong";
    case Strength::Moderate: return "moderate";
    case Strength::Gentle: return "gentle";
    }
    return "gentle";
}

constexpr std::string_view to_string(RegionKind k) noexcept {
    return k == RegionKind::Embedding ? "embedding" : "active";
}

struct DetectionSettings {
    double prominence_floor_fraction = 0.005;
    double valley_merge_fraction = 0.03;
    std::size_t embedding_boundary_layer = 1;
    std::size_t sustain_layers = 2;

    void check() const {
        auto frac_ok = [](double f) { return f > 0.0 && f < 1.0; };
        if (!frac_ok(prominence_floor_fraction))
            throw Error(ErrorKind::Validation, "prominence_floor_fraction: expected in (0, 1)");
        if (!frac_ok(valley_merge_fraction)) throw Error(ErrorKind::Validation, "valley_merge_fraction: expected in (0, 1)");
        if (sustain_layers < 1) throw Error(ErrorKind::Validation, "sustain_layers: expected >= 1");
    }
};

struct CazRegion {
    std::size_t start_layer = 0;
    std::size_t peak_layer = 0;
    std::size_t end_layer = 0; // inclusive
    double peak_separation = 0.0;
    double peak_coherence = 0.0;
    double prominence = 0.0;
    double score = 0.0;
    Strength strength = Strength::Gentle;
    RegionKind kind = RegionKind::Active;
    double rise_fall_asymmetry = 0.0;

    std::size_t width() const noexcept { return end_layer - start_layer + 1; }
};

struct CazProfile {
    std::vector<CazRegion> regions;
    std::size_t peak_region_index = 0;
    DetectionSettings settings;

    std::size_t n_regions() const noexcept { return regions.size(); }
};

namespace detail {

inline std::size_t argmax_leftmost(const Curve& c, std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i < hi; ++i)
        if (c[i] > c[best]) best = i;
    return best;
}

inline std::size_t argmin_leftmost(const Curve& c, std::size_t lo, std::size_t hi) {
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i < hi; ++i)
        if (c[i] < c[best]) best = i;
    return best;
}

inline double mean(const Curve& c) { return std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size()); }

} // namespace detail

// Local maxima. A run of equal values is one candidate reported at its
// leftmost index; it is a peak when every existing neighbor of the run is
// strictly lower. A run covering the whole curve is not a peak.
inline std::vector<std::size_t> find_peaks(const Curve& curve) {
    std::vector<std::size_t> peaks;
    const auto n = curve.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && curve[j + 1] == curve[i]) ++j;
        const bool left_ok = i == 0 || curve[i - 1] < curve[i];
        const bool right_ok = j == n - 1 || curve[j + 1] < curve[i];
        if (left_ok && right_ok && !(i == 0 && j == n - 1)) peaks.push_back(i);
        i = j + 1;
    }
    return peaks;
}

// Topographic prominence. On each side the base is the minimum between the
// peak and the nearest strictly higher point (or the array end). A side with
// no samples (peak at an array end) does not contribute.
inline double prominence(const Curve& curve, std::size_t peak) {
    const double h = curve[peak];
    std::optional<double> left, right;
    for (std::size_t i = peak; i-- > 0;) {
        if (curve[i] > h) break;
        left = left ? std::min(*left, curve[i]) : curve[i];
    }
    for (std::size_t i = peak + 1; i < curve.size(); ++i) {
        if (curve[i] > h) break;
        right = right ? std::min(*right, curve[i]) : curve[i];
    }
    if (!left && !right) return 0.0;
    const double base = left && right ? std::max(*left, *right) : (left ? *left : *right);
    return h - base;
}

inline double caz_score(double prom, double mean_sep, double peak_coh, double mean_coh, std::size_t width,
                        std::size_t n_layers) {
    if (mean_sep < kDegenerateEps || mean_coh < kDegenerateEps)
        throw Error(ErrorKind::DegenerateDispersion, "mean separation or mean coherence below 1e-12");
    return (prom / mean_sep) * (1.0 + peak_coh / mean_coh) *
           std::sqrt(static_cast<double>(width) / static_cast<double>(n_layers));
}

inline Strength classify_strength(double score) {
    if (score > 0.5) return Strength::Major;
    if (score > 0.2) return Strength::Strong;
    if (score > 0.05) return Strength::Moderate;
    return Strength::Gentle;
}

inline RegionKind classify_kind(const CazRegion& region, const DetectionSettings& settings) {
    return region.peak_layer <= settings.embedding_boundary_layer ? RegionKind::Embedding : RegionKind::Active;
}

namespace detail {

// Fills the derived fields of a region whose start/peak/end are set.
inline void annotate(CazRegion& r, const LayerMetrics& m, const DetectionSettings& settings, double mean_sep,
                     double mean_coh) {
    r.peak_separation = m.separation[r.peak_layer];
    r.peak_coherence = m.coherence[r.peak_layer];
    r.prominence = prominence(m.separation, r.peak_layer);
    r.score = caz_score(r.prominence, mean_sep, r.peak_coherence, mean_coh, r.width(), m.n_layers());
    r.strength = classify_strength(r.score);
    r.kind = classify_kind(r, settings);
    r.rise_fall_asymmetry = static_cast<double>(r.peak_layer - r.start_layer) /
                            static_cast<double>(std::max<std::size_t>(1, r.end_layer - r.peak_layer));
}

// First index l in [lo, hi) such that pred holds on l .. l+run-1 (all < n).
template <class Pred>
std::optional<std::size_t> first_sustained(std::size_t lo, std::size_t hi, std::size_t run, std::size_t n, Pred pred) {
    for (std::size_t l = lo; l < hi && l + run <= n; ++l) {
        bool ok = true;
        for (std::size_t j = l; j < l + run && ok; ++j) ok = pred(j);
        if (ok) return l;
    }
    return std::nullopt;
}

} // namespace detail

// Velocity-based detector for unimodal curves. Entry is the first sustained
// crossing of half the global max velocity (searched up to the peak), the
// peak is argmax S, exit is the first layer of the first sustained negative
// velocity run at or after the peak.
inline CazRegion detect_single_region(const LayerMetrics& m, const DetectionSettings& settings = {}) {
    settings.check();
    const auto n = m.n_layers();
    const auto& v = m.velocity;
    const double vmax = *std::max_element(v.begin(), v.end());
    if (!(vmax > 0.0)) throw Error(ErrorKind::NoAllocationDetected, "velocity never positive");
    const double theta = 0.5 * vmax;
    const auto run = settings.sustain_layers;

    CazRegion r;
    r.peak_layer = detail::argmax_leftmost(m.separation, 0, n);
    r.start_layer =
        detail::first_sustained(0, r.peak_layer + 1, run, n, [&](std::size_t j) { return v[j] >= theta; }).value_or(0);
    r.end_layer =
        detail::first_sustained(r.peak_layer, n, run, n, [&](std::size_t j) { return v[j] < 0.0; }).value_or(n - 1);
    detail::annotate(r, m, settings, detail::mean(m.separation), detail::mean(m.coherence));
    return r;
}

// Scored multi-region detector: prominence floor, valley merge, saddle split.
inline CazProfile detect_profile(const LayerMetrics& m, const DetectionSettings& settings = {}) {
    settings.check();
    const auto& s = m.separation;
    const auto n = s.size();
    const double smax = *std::max_element(s.begin(), s.end());
    if (!(smax > 0.0)) throw Error(ErrorKind::NoAllocationDetected, "separation is zero everywhere");

    std::vector<std::size_t> peaks;
    for (auto p : find_peaks(s))
        if (prominence(s, p) >= settings.prominence_floor_fraction * smax) peaks.push_back(p);
    if (peaks.empty()) throw Error(ErrorKind::NoAllocationDetected, "no peak survives the prominence floor");

    auto saddle = [&](std::size_t a, std::size_t b) { return detail::argmin_leftmost(s, a + 1, b); };

    // Merge the leftmost too-shallow valley, keep the higher peak (left on
    // ties), and rescan until every valley is deep enough.
    const double merge_depth = settings.valley_merge_fraction * smax;
    for (bool merged = true; merged && peaks.size() > 1;) {
        merged = false;
        for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
            const auto a = peaks[i], b = peaks[i + 1];
            if (std::min(s[a], s[b]) - s[saddle(a, b)] < merge_depth) {
                peaks.erase(peaks.begin() + static_cast<std::ptrdiff_t>(s[b] > s[a] ? i : i + 1));
                merged = true;
                break;
            }
        }
    }

    CazProfile profile;
    profile.settings = settings;
    const double mean_sep = detail::mean(s);
    const double mean_coh = detail::mean(m.coherence);
    std::size_t start = 0;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        CazRegion r;
        r.start_layer = start;
        r.peak_layer = peaks[i];
        r.end_layer = i + 1 < peaks.size() ? saddle(peaks[i], peaks[i + 1]) : n - 1;
        detail::annotate(r, m, settings, mean_sep, mean_coh);
        profile.regions.push_back(r);
        start = r.end_layer;
    }
    for (std::size_t i = 1; i < profile.regions.size(); ++i)
        if (profile.regions[i].peak_separation > profile.regions[profile.peak_region_index].peak_separation)
            profile.peak_region_index = i;
    return profile;
}

} // namespace caz
