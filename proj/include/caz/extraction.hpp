#pragma once

// Concept-direction extraction from a detected region: single-layer DoM,
// windowed PCA, delta PCA, and DoM at the handoff layer.

#include "caz/activation_store.hpp"
#include "caz/detection.hpp"
#include "caz/error.hpp"
#include "caz/linalg.hpp"
#include "caz/metrics.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>

namespace caz {

enum class ExtractionMethod { SingleLayerDoM, WindowedPCA, DeltaPCA, HandoffDoM };

constexpr std::string_view to_string(ExtractionMethod m) noexcept {
    switch (m) {
    case ExtractionMethod::SingleLayerDoM: return "single_layer_dom";
    case ExtractionMethod::WindowedPCA: return "windowed_pca";
    case ExtractionMethod::DeltaPCA: return "delta_pca";
    case ExtractionMethod::HandoffDoM: return "handoff_dom";
    }
    return "single_layer_dom";
}

struct ConceptDirection {
    Vector vector;
    ExtractionMethod method = ExtractionMethod::SingleLayerDoM;
    std::pair<std::size_t, std::size_t> source_layers{0, 0};
    std::string concept_name;
    std::string model_name;
};

struct HandoffResult {
    std::size_t handoff_layer = 0;
    double omega_at_handoff = 0.0;
    double threshold_used = 0.0;
};

inline constexpr double kDefaultOmegaThreshold = 0.05;

namespace detail {

inline ConceptDirection make_direction(const ActivationSet& set, Vector v, ExtractionMethod method, std::size_t first,
                                       std::size_t last) {
    return ConceptDirection{std::move(v), method, {first, last}, set.meta.concept_name, set.meta.model_name};
}

inline void check_region(const ActivationSet& set, const CazRegion& region) {
    if (!(region.start_layer <= region.peak_layer && region.peak_layer <= region.end_layer &&
          region.end_layer < set.n_layers()))
        throw Error(ErrorKind::Validation, "region: layers out of order or beyond the model depth");
}

// PCA sign is fixed so the component points along the peak-layer DoM.
inline Vector align_to(Vector v, const Vector& reference) {
    if (v.dot(reference) < 0.0) v = -v;
    return v;
}

} // namespace detail

inline ConceptDirection extract_single_layer(const ActivationSet& set, std::size_t layer) {
    if (layer >= set.n_layers()) throw Error(ErrorKind::Validation, "layer: index beyond the model depth");
    try {
        return detail::make_direction(set, dom_vector(set.pos[layer], set.neg[layer]),
                                      ExtractionMethod::SingleLayerDoM, layer, layer);
    } catch (const Error& e) {
        throw e.at_layer(layer);
    }
}

// PC1 of every pos and neg row across [start, end], stacked and centered.
inline ConceptDirection extract_windowed_pca(const ActivationSet& set, const CazRegion& region) {
    detail::check_region(set, region);
    const auto rows_per_layer = static_cast<Eigen::Index>(set.n_pos() + set.n_neg());
    Matrix stack(rows_per_layer * static_cast<Eigen::Index>(region.width()), static_cast<Eigen::Index>(set.dim()));
    Eigen::Index at = 0;
    for (auto l = region.start_layer; l <= region.end_layer; ++l, at += rows_per_layer)
        stack.middleRows(at, rows_per_layer) << set.pos[l], set.neg[l];
    const Vector ref = extract_single_layer(set, region.peak_layer).vector;
    return detail::make_direction(set, detail::align_to(principal_component(stack).direction, ref),
                                  ExtractionMethod::WindowedPCA, region.start_layer, region.end_layer);
}

// Per-sample layer deltas h_l - h_{l-1} for l in [max(start, 1), end].
inline Matrix delta_stack(const ActivationSet& set, const CazRegion& region) {
    detail::check_region(set, region);
    const auto first = std::max<std::size_t>(region.start_layer, 1);
    if (first > region.end_layer) throw Error(ErrorKind::DegenerateDispersion, "window contains no layer delta");
    const auto rows_per_layer = static_cast<Eigen::Index>(set.n_pos() + set.n_neg());
    const auto n_deltas = static_cast<Eigen::Index>(region.end_layer - first + 1);
    Matrix stack(rows_per_layer * n_deltas, static_cast<Eigen::Index>(set.dim()));
    Eigen::Index at = 0;
    for (auto l = first; l <= region.end_layer; ++l, at += rows_per_layer)
        stack.middleRows(at, rows_per_layer) << set.pos[l] - set.pos[l - 1], set.neg[l] - set.neg[l - 1];
    return stack;
}

inline ConceptDirection extract_delta_pca(const ActivationSet& set, const CazRegion& region) {
    const Matrix stack = delta_stack(set, region);
    const Vector ref = extract_single_layer(set, region.peak_layer).vector;
    return detail::make_direction(set, detail::align_to(principal_component(stack).direction, ref),
                                  ExtractionMethod::DeltaPCA, std::max<std::size_t>(region.start_layer, 1) - 1,
                                  region.end_layer);
}

// First layer after the peak (searching to the final layer) whose angular
// velocity 1 - |DS| falls below the threshold.
inline HandoffResult find_handoff(const LayerMetrics& m, const CazRegion& region,
                                  double omega_threshold = kDefaultOmegaThreshold) {
    const auto n = m.n_layers();
    if (region.peak_layer + 1 >= n) throw Error(ErrorKind::NoHandoffFound, "peak is the final layer");
    for (auto l = region.peak_layer + 1; l < n; ++l) {
        const double omega = angular_velocity(m.directional_stability[l]);
        if (omega < omega_threshold) return {l, omega, omega_threshold};
    }
    throw Error(ErrorKind::NoHandoffFound, "no post-peak layer with angular velocity below threshold");
}

inline ConceptDirection extract_handoff(const ActivationSet& set, const LayerMetrics& m, const CazRegion& region,
                                        double omega_threshold = kDefaultOmegaThreshold) {
    const auto h = find_handoff(m, region, omega_threshold).handoff_layer;
    auto dir = extract_single_layer(set, h);
    dir.method = ExtractionMethod::HandoffDoM;
    return dir;
}

} // namespace caz
