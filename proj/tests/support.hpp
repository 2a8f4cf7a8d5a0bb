#pragma once

// Shared fixtures for the unit and acceptance suites.

#include "caz/caz.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace caz::testing {

using synth::NormalStream;
using synth::SplitMix64;

inline Matrix random_matrix(NormalStream& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next();
    return m;
}

inline Matrix random_orthogonal(NormalStream& rng, Eigen::Index d) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, d, d));
    return qr.householderQ() * Matrix::Identity(d, d);
}

inline std::size_t uniform_int(SplitMix64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
}

inline double uniform_real(SplitMix64& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

// Metrics assembled directly from curves, for detector tests that do not
// need activations. dom is a fixed axis, so DS is identically 1.
inline LayerMetrics metrics_from_curve(const Curve& s, Curve c = {}, std::size_t k = 0) {
    LayerMetrics m;
    m.k = k ? k : smoothing_halfwidth(s.size());
    m.separation = s;
    m.coherence = c.empty() ? Curve(s.size(), 0.5) : std::move(c);
    m.velocity = velocity(s, m.k);
    m.dom.assign(s.size(), Vector::Unit(2, 0));
    m.directional_stability = directional_stability(m.dom);
    return m;
}

inline ActivationSet random_set(NormalStream& rng, std::size_t layers, Eigen::Index np, Eigen::Index nn, Eigen::Index d) {
    ActivationSet s;
    for (std::size_t l = 0; l < layers; ++l) {
        // binary32-representable values so sets survive a CAZA round trip
        s.pos.push_back(random_matrix(rng, np, d).cast<float>().cast<double>());
        s.neg.push_back((random_matrix(rng, nn, d).array() + 0.5).matrix().cast<float>().cast<double>());
    }
    s.meta = {"concept", "model", "final-token", static_cast<std::uint32_t>(np)};
    return s;
}

inline std::filesystem::path tmp_dir(const std::string& name) {
    auto dir = std::filesystem::path(CAZ_TEST_TMPDIR) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace caz::testing
