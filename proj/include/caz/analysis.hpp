#pragma once

// Sub-representation geometry across a profile and depth-matched cross-model
// alignment after an orthogonal Procrustes fit.

#include "caz/activation_store.hpp"
#include "caz/detection.hpp"
#include "caz/error.hpp"
#include "caz/linalg.hpp"
#include "caz/metrics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace caz {

struct PeakCosine {
    std::size_t shallow_layer;
    std::size_t deep_layer;
    double abs_cosine;
};

// |cos| between dom vectors at every pair of region peaks, shallow to deep.
inline std::vector<PeakCosine> peak_direction_cosines(const LayerMetrics& m, const CazProfile& profile) {
    if (profile.n_regions() < 2) throw Error(ErrorKind::SingleRegion, "profile has a single region");
    std::vector<PeakCosine> out;
    const auto& rs = profile.regions;
    for (std::size_t i = 0; i < rs.size(); ++i)
        for (std::size_t j = i + 1; j < rs.size(); ++j) {
            const auto a = rs[i].peak_layer, b = rs[j].peak_layer;
            out.push_back({a, b, std::min(1.0, std::abs(m.dom[a].dot(m.dom[b])))});
        }
    return out;
}

// Pairwise dom-vector cosines; exactly symmetric with a unit diagonal.
inline Matrix layer_cosine_matrix(const LayerMetrics& m) {
    const auto n = static_cast<Eigen::Index>(m.n_layers());
    for (std::size_t l = 0; l < m.dom.size(); ++l)
        if (m.dom[l].size() == 0) throw Error(ErrorKind::DegenerateDirection, "dom vector undefined", l);
    Matrix c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j)
            c(i, j) = c(j, i) = std::clamp(m.dom[static_cast<std::size_t>(i)].dot(m.dom[static_cast<std::size_t>(j)]), -1.0, 1.0);
    }
    return c;
}

// Mean |cosine| between the layer blocks of a profile, off-diagonal entries
// only. Block i covers [start_i, end_i), the final block includes its end;
// the shared saddle layer belongs to the deeper region.
inline Matrix block_cosine_means(const Matrix& cosines, const CazProfile& profile) {
    const auto r = static_cast<Eigen::Index>(profile.n_regions());
    auto bounds = [&](Eigen::Index i) {
        const auto& reg = profile.regions[static_cast<std::size_t>(i)];
        const auto hi = i + 1 == r ? reg.end_layer + 1 : reg.end_layer;
        return std::pair<Eigen::Index, Eigen::Index>(static_cast<Eigen::Index>(reg.start_layer),
                                                     static_cast<Eigen::Index>(std::max(hi, reg.start_layer + 1)));
    };
    Matrix means = Matrix::Zero(r, r);
    for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) {
            const auto [a0, a1] = bounds(a);
            const auto [b0, b1] = bounds(b);
            double sum = 0.0;
            std::size_t count = 0;
            for (auto i = a0; i < a1; ++i)
                for (auto j = b0; j < b1; ++j)
                    if (i != j) {
                        sum += std::abs(cosines(i, j));
                        ++count;
                    }
            means(a, b) = count ? sum / static_cast<double>(count) : 1.0;
        }
    return means;
}

struct ProcrustesResult {
    Matrix rotation;            // d x d orthogonal, det = +1 or -1
    bool rank_deficient = false; // rotation is not unique
};

// Orthogonal R minimizing |source * R - target|_F (rows are directions):
// with source^T target = U S V^T, R = U V^T.
inline ProcrustesResult procrustes_rotation(const Matrix& source, const Matrix& target) {
    if (source.rows() != target.rows() || source.cols() != target.cols())
        throw Error(ErrorKind::DimensionMismatch, "source and target shapes differ");
    if (source.rows() < 1 || source.cols() < 1) throw Error(ErrorKind::DimensionMismatch, "empty direction matrices");
    const Matrix cross = source.transpose() * target;
    Eigen::BDCSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    ProcrustesResult out;
    out.rotation = svd.matrixU() * svd.matrixV().transpose();
    const auto& sv = svd.singularValues();
    // Any zero singular value leaves a free sign (or rotation) in R.
    const double tol = (sv.size() > 0 ? sv(0) : 0.0) * 1e-10 * static_cast<double>(cross.cols());
    Eigen::Index null_dims = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) <= tol) ++null_dims;
    out.rank_deficient = null_dims > 0;
    return out;
}

struct FractionAlignment {
    double fraction;
    std::size_t layer_a;
    std::size_t layer_b;
    double matched;
    std::vector<double> mismatched;
};

struct AlignmentReport {
    double matched_mean = 0.0;
    double mismatched_mean = 0.0;
    double delta = 0.0;
    std::size_t n_valid = 0;
    std::size_t n_excluded = 0;
    std::vector<FractionAlignment> per_fraction;
    bool rotation_rank_deficient = false;
};

// Calibration direction pairs used to fit the cross-model rotation. Rows of
// `source` live in model A's space, rows of `target` in model B's.
struct Calibration {
    Matrix source;
    Matrix target;
};

inline constexpr double kDefaultMinSeparation = 0.1;

// round(f * (L - 1)), halves rounded up.
inline std::size_t probe_layer(double fraction, std::size_t n_layers) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_layers - 1) + 0.5));
}

inline AlignmentReport depth_matched_alignment(const ActivationSet& a, const ActivationSet& b,
                                               const std::vector<double>& fractions, const Calibration& calibration,
                                               double min_separation = kDefaultMinSeparation) {
    validate(a);
    validate(b);
    if (a.dim() != b.dim())
        throw Error(ErrorKind::DimensionMismatch,
                    "model dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()) + " differ");
    const auto d = static_cast<Eigen::Index>(a.dim());
    if (calibration.source.cols() != d || calibration.target.cols() != d)
        throw Error(ErrorKind::DimensionMismatch, "calibration directions do not match the model dimension");
    for (double f : fractions)
        if (!(f > 0.0 && f < 1.0)) throw Error(ErrorKind::Validation, "fractions: expected values in (0, 1)");

    struct Probe {
        double fraction;
        std::size_t la, lb;
        Vector dom_a, dom_b;
    };
    std::vector<Probe> valid;
    AlignmentReport report;
    for (double f : fractions) {
        const auto la = probe_layer(f, a.n_layers());
        const auto lb = probe_layer(f, b.n_layers());
        const double sa = separation(a.pos[la], a.neg[la]);
        const double sb = separation(b.pos[lb], b.neg[lb]);
        if (sa < min_separation || sb < min_separation) {
            ++report.n_excluded;
            continue;
        }
        valid.push_back({f, la, lb, dom_vector(a.pos[la], a.neg[la]), dom_vector(b.pos[lb], b.neg[lb])});
    }
    report.n_valid = valid.size();
    if (valid.empty()) throw Error(ErrorKind::NoValidFractions, "every probe depth is below the separation threshold");

    const auto fit = procrustes_rotation(calibration.source, calibration.target);
    report.rotation_rank_deficient = fit.rank_deficient;

    double matched_sum = 0.0, mismatched_sum = 0.0;
    std::size_t mismatched_count = 0;
    for (const auto& p : valid) {
        const Vector rotated = (p.dom_a.transpose() * fit.rotation).transpose();
        FractionAlignment fa{p.fraction, p.la, p.lb, rotated.dot(p.dom_b), {}};
        for (const auto& q : valid)
            if (&q != &p) fa.mismatched.push_back(rotated.dot(q.dom_b));
        matched_sum += fa.matched;
        for (double c : fa.mismatched) mismatched_sum += c;
        mismatched_count += fa.mismatched.size();
        report.per_fraction.push_back(std::move(fa));
    }
    report.matched_mean = matched_sum / static_cast<double>(valid.size());
    report.mismatched_mean = mismatched_count ? mismatched_sum / static_cast<double>(mismatched_count) : 0.0;
    report.delta = report.matched_mean - report.mismatched_mean;
    return report;
}

// Identity calibration (no rotation) for a d-dimensional pair.
inline Calibration identity_calibration(std::size_t d) {
    const Matrix eye = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    return {eye, eye};
}

} // namespace caz
