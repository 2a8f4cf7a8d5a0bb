#pragma once

// Layer-wise curves: separation S(l), coherence C(l), velocity v(l) and
// directional stability DS(l), plus the per-layer dominant direction.

#include "caz/activation_store.hpp"
#include "caz/error.hpp"
#include "caz/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace caz {

using Curve = std::vector<double>;

struct LayerMetrics {
    Curve separation;
    Curve coherence;
    Curve velocity;
    Curve directional_stability; // index 0 holds 1.0 by convention
    std::vector<Vector> dom;
    std::size_t k = 1;

    std::size_t n_layers() const noexcept { return separation.size(); }
};

// Fisher-normalized centroid distance with population covariance:
// |mean(pos) - mean(neg)| / sqrt((tr(S_pos) + tr(S_neg)) / 2).
inline double separation(const Matrix& pos, const Matrix& neg) {
    const Vector mp = column_mean(pos);
    const Vector mn = column_mean(neg);
    const double gap = (mp - mn).norm();
    // tr(population covariance) = mean squared distance to the centroid
    const double tr_pos = (pos.rowwise() - mp.transpose()).squaredNorm() / static_cast<double>(pos.rows());
    const double tr_neg = (neg.rowwise() - mn.transpose()).squaredNorm() / static_cast<double>(neg.rows());
    const double spread = std::sqrt(0.5 * (tr_pos + tr_neg));
    if (spread < kDegenerateEps) {
        if (gap < kDegenerateEps) return 0.0;
        throw Error(ErrorKind::DegenerateDispersion, "within-class spread below 1e-12 with a nonzero centroid gap");
    }
    return gap / spread;
}

// Explained-variance ratio of PC1 of the pooled, mean-centered activations.
inline double coherence(const Matrix& pos, const Matrix& neg) {
    return principal_component(vstack(pos, neg)).explained_ratio();
}

inline std::size_t smoothing_halfwidth(std::size_t n_layers) { return std::max<std::size_t>(1, n_layers / 24); }

// Secant slope across a window of half-width k, indices clamped to the curve:
// v(l) = (S(l+k) - S(l-k-1)) / (2k+1).
inline Curve velocity(const Curve& s, std::size_t k) {
    const auto n = static_cast<std::ptrdiff_t>(s.size());
    const auto kk = static_cast<std::ptrdiff_t>(k);
    auto at = [&](std::ptrdiff_t i) { return s[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, n - 1))]; };
    Curve v(s.size());
    for (std::ptrdiff_t l = 0; l < n; ++l)
        v[static_cast<std::size_t>(l)] = (at(l + kk) - at(l - kk - 1)) / static_cast<double>(2 * k + 1);
    return v;
}

inline Vector dom_vector(const Matrix& pos, const Matrix& neg) {
    const Vector gap = column_mean(pos) - column_mean(neg);
    const double norm = gap.norm();
    if (norm < kDegenerateEps) throw Error(ErrorKind::DegenerateDirection, "class centroids coincide");
    return gap / norm;
}

inline Curve directional_stability(const std::vector<Vector>& dom) {
    Curve ds(dom.size(), 1.0);
    for (std::size_t l = 1; l < dom.size(); ++l) ds[l] = std::clamp(dom[l].dot(dom[l - 1]), -1.0, 1.0);
    return ds;
}

// omega(l) = 1 - |DS(l)|; a sign flip counts as no rotation.
inline double angular_velocity(double ds) { return 1.0 - std::abs(ds); }

inline LayerMetrics compute_layer_metrics(const ActivationSet& set, std::optional<std::size_t> k = std::nullopt) {
    validate(set);
    const auto n = set.n_layers();
    LayerMetrics m;
    m.k = k.value_or(smoothing_halfwidth(n));
    if (m.k < 1) throw Error(ErrorKind::Validation, "k: expected >= 1");
    m.separation.resize(n);
    m.coherence.resize(n);
    m.dom.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        try {
            m.separation[l] = separation(set.pos[l], set.neg[l]);
            m.coherence[l] = coherence(set.pos[l], set.neg[l]);
            m.dom[l] = dom_vector(set.pos[l], set.neg[l]);
        } catch (const Error& e) {
            throw e.at_layer(l);
        }
    }
    m.velocity = velocity(m.separation, m.k);
    m.directional_stability = directional_stability(m.dom);
    return m;
}

} // namespace caz
