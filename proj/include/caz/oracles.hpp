#pragma once

// Reference implementations used by the test suites. They are written for
// obviousness, not speed, and share no code with the production paths they
// check.

#include "caz/error.hpp"
#include "caz/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace caz::synth {

// Exhaustive topographic prominence. A candidate base j on either side is
// admissible when no sample between the peak and j (j included) is strictly
// higher than the peak; the side's base is the lowest admissible candidate.
// A side without samples is ignored.
inline double oracle_prominence(const std::vector<double>& curve, std::size_t peak) {
    const double h = curve[peak];
    auto admissible = [&](std::size_t j) {
        const auto lo = std::min(j, peak), hi = std::max(j, peak);
        for (auto i = lo; i <= hi; ++i)
            if (curve[i] > h) return false;
        return true;
    };
    double left = std::numeric_limits<double>::infinity();
    double right = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < curve.size(); ++j) {
        if (j == peak || !admissible(j)) continue;
        (j < peak ? left : right) = std::min(j < peak ? left : right, curve[j]);
    }
    const bool has_left = peak > 0, has_right = peak + 1 < curve.size();
    if (!has_left && !has_right) return 0.0;
    if (!has_left) return h - right;
    if (!has_right) return h - left;
    return h - std::max(left, right);
}

struct EigenDecomposition {
    std::vector<double> values; // descending
    Matrix vectors;             // column i pairs with values[i]
    int sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// 1e-12 (scaled by the matrix norm when that exceeds 1).
inline EigenDecomposition oracle_eigen(const Matrix& m) {
    const auto n = m.rows();
    if (m.cols() != n) throw Error(ErrorKind::Validation, "oracle_eigen: matrix is not square");
    if (n > 64) throw Error(ErrorKind::Validation, "oracle_eigen: limited to d <= 64");
    const double scale = std::max(1.0, m.norm());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error(ErrorKind::Validation, "oracle_eigen: matrix is not symmetric");

    Matrix a = 0.5 * (m + m.transpose());
    Matrix v = Matrix::Identity(n, n);
    auto off_norm = [&] {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    EigenDecomposition out;
    const double tol = 1e-12 * scale;
    while (off_norm() >= tol && out.sweeps < 100) {
        ++out.sweeps;
        for (Eigen::Index p = 0; p < n - 1; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                // Rotation angle that zeroes a(p, q).
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        out.values.push_back(a(src, src));
        out.vectors.col(i) = v.col(src);
    }
    return out;
}

// Population covariance of mean-centered rows, written out longhand.
inline Matrix oracle_covariance(const Matrix& rows) {
    const auto n = rows.rows(), d = rows.cols();
    Vector mean = Vector::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i) mean += rows.row(i).transpose();
    mean /= static_cast<double>(n);
    Matrix cov = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector x = rows.row(i).transpose() - mean;
        cov += x * x.transpose();
    }
    return cov / static_cast<double>(n);
}

} // namespace caz::synth
