#pragma once

#include "caz/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace caz {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct PrincipalComponent {
    Vector direction;      // unit norm; sign is arbitrary
    double top_eigenvalue; // lambda_1 of the population covariance
    double total_variance; // sum of all eigenvalues (trace)

    double explained_ratio() const { return top_eigenvalue / total_variance; }
};

inline Vector column_mean(const Matrix& rows) { return rows.colwise().mean().transpose(); }

inline Matrix vstack(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

// First principal component of the mean-centered rows with population
// covariance (divide by row count). Works on the smaller of the d x d
// covariance and the N x N Gram matrix; both share their nonzero spectrum.
inline PrincipalComponent principal_component(const Matrix& rows) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    if (n < 2 || d < 1) throw Error(ErrorKind::DegenerateDispersion, "need at least two rows for a covariance");
    const Matrix centered = rows.rowwise() - rows.colwise().mean();
    const double total = centered.squaredNorm() / static_cast<double>(n);
    if (total < kDegenerateEps) throw Error(ErrorKind::DegenerateDispersion, "total variance below 1e-12");

    PrincipalComponent pc;
    pc.total_variance = total;
    if (n < d) {
        const Matrix gram = centered * centered.transpose() / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
        pc.top_eigenvalue = eig.eigenvalues()(n - 1);
        pc.direction = (centered.transpose() * eig.eigenvectors().col(n - 1)).normalized();
    } else {
        const Matrix cov = centered.transpose() * centered / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
        pc.top_eigenvalue = eig.eigenvalues()(d - 1);
        pc.direction = eig.eigenvectors().col(d - 1).normalized();
    }
    return pc;
}

} // namespace caz
