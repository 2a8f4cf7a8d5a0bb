#pragma once

// Seeded synthetic activations with planted ground truth.
//
// Each layer draws n_pos + n_neg isotropic normal points with class means
// +/-(s(l) * sigma * sqrt(d) / 2) * u(l). Both class covariances are
// sigma^2 I, so the population Fisher separation at layer l is exactly s(l).
//
// Randomness is fully specified so a seed means the same thing in any
// implementation: SplitMix64 words, and standard normals by Box-Muller on
// consecutive word pairs (u1 = ((w1 >> 11) + 1) * 2^-53 in (0, 1],
// u2 = (w2 >> 11) * 2^-53 in [0, 1); the cosine branch is returned first,
// the sine branch second).

#include "caz/activation_store.hpp"
#include "caz/error.hpp"
#include "caz/linalg.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace caz::synth {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) noexcept : words_(seed) {}

    double next() noexcept {
        if (spare_) {
            const double z = *spare_;
            spare_.reset();
            return z;
        }
        const double u1 = static_cast<double>((words_.next() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(words_.next() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        return r * std::cos(theta);
    }

    Vector vector(std::size_t d) {
        Vector v(static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = next();
        return v;
    }

private:
    SplitMix64 words_;
    std::optional<double> spare_;
};

// Random unit vector drawn from its own stream.
inline Vector random_direction(std::uint64_t seed, std::size_t d) {
    NormalStream rng(seed);
    Vector v = rng.vector(d);
    while (v.norm() < 1e-12) v = rng.vector(d);
    return v.normalized();
}

struct PlantedRegion {
    std::size_t start = 0;
    std::size_t peak = 0;
    std::size_t end = 0;
    double peak_separation = 1.0;
    // Separation at the region boundaries; default to the spec baseline.
    std::optional<double> start_separation;
    std::optional<double> end_separation;
    std::optional<std::uint64_t> direction_seed;
    std::optional<std::vector<double>> direction;
    // Rotate u(l) towards a settled orthogonal direction over this many
    // layers after the peak.
    std::optional<std::size_t> rotation_stop_offset;
};

struct PlantSpec {
    std::size_t n_layers = 24;
    std::size_t dim = 64;
    std::size_t n_pos = 250;
    std::size_t n_neg = 250;
    std::vector<PlantedRegion> regions;
    double noise_sigma = 1.0;
    double baseline_separation = 0.0;
    // AR(1) coefficient of per-sample noise across layers; 0 draws every
    // layer independently. Marginals stay N(0, sigma^2 I) for any value.
    double layer_correlation = 0.0;
    std::uint64_t seed = 0;
    std::string concept_name = "synthetic";
    std::string model_name = "planted";
};

struct TruthRegion {
    std::size_t start = 0;
    std::size_t peak = 0;
    std::size_t end = 0;
    double peak_separation = 0.0;
    Vector direction;
    std::optional<std::size_t> handoff_layer; // layer at which rotation stops
    std::optional<Vector> settled_direction;
};

struct GroundTruth {
    std::vector<double> separation;      // planted s(l)
    std::vector<Vector> layer_direction; // planted u(l)
    std::vector<TruthRegion> regions;
    std::uint64_t seed = 0;
};

namespace detail {

[[noreturn]] inline void bad_spec(const std::string& what) { throw Error(ErrorKind::Validation, "plant spec: " + what); }

inline std::uint64_t region_seed(std::uint64_t seed, std::size_t index) {
    return SplitMix64(seed ^ (0xD1B54A32D192ED03ULL * (index + 1))).next();
}

inline double lerp_at(std::size_t l, std::size_t a, std::size_t b, double va, double vb) {
    if (a == b) return vb;
    const double t = static_cast<double>(l - a) / static_cast<double>(b - a);
    return va + t * (vb - va);
}

// Rotation in the plane of two orthonormal vectors.
inline Vector slerp_orthonormal(const Vector& from, const Vector& to, double t) {
    const double angle = 0.5 * std::numbers::pi * t;
    return (std::cos(angle) * from + std::sin(angle) * to).normalized();
}

} // namespace detail

inline void validate(const PlantSpec& spec) {
    using detail::bad_spec;
    if (spec.n_layers < 3) bad_spec("n_layers must be >= 3");
    if (spec.dim < 1) bad_spec("dim must be >= 1");
    if (spec.n_pos < 2 || spec.n_neg < 2) bad_spec("n_pos and n_neg must be >= 2");
    if (!(spec.noise_sigma > 0.0)) bad_spec("noise_sigma must be > 0");
    if (!(spec.baseline_separation >= 0.0)) bad_spec("baseline_separation must be >= 0");
    if (!(spec.layer_correlation >= 0.0 && spec.layer_correlation < 1.0)) bad_spec("layer_correlation must be in [0, 1)");
    const auto& rs = spec.regions;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const auto& r = rs[i];
        const auto tag = "region " + std::to_string(i) + ": ";
        if (!(r.start <= r.peak && r.peak <= r.end && r.end < spec.n_layers)) bad_spec(tag + "needs start <= peak <= end < n_layers");
        if (!(r.peak_separation > 0.0)) bad_spec(tag + "peak_separation must be > 0");
        for (auto edge : {r.start_separation, r.end_separation})
            if (edge && !(*edge >= 0.0 && *edge <= r.peak_separation)) bad_spec(tag + "boundary separation must be in [0, peak]");
        if (r.direction) {
            if (r.direction->size() != spec.dim) bad_spec(tag + "direction length differs from dim");
            if (Eigen::Map<const Vector>(r.direction->data(), static_cast<Eigen::Index>(spec.dim)).norm() < 1e-12)
                bad_spec(tag + "direction is zero");
        }
        if (r.rotation_stop_offset && *r.rotation_stop_offset < 1) bad_spec(tag + "rotation_stop_offset must be >= 1");
        if (r.rotation_stop_offset && spec.dim < 2) bad_spec(tag + "rotation needs dim >= 2");
        if (i > 0) {
            const auto& prev = rs[i - 1];
            if (r.start < prev.end) bad_spec(tag + "overlaps the previous region");
            if (r.start == prev.end) {
                const double a = prev.end_separation.value_or(spec.baseline_separation);
                const double b = r.start_separation.value_or(spec.baseline_separation);
                if (a != b) bad_spec(tag + "shared boundary has two different separations");
            }
        }
    }
}

// Planted s(l), u(l) and per-region truth; no sampling involved.
inline GroundTruth plant_truth(const PlantSpec& spec) {
    validate(spec);
    const auto n = spec.n_layers;
    const auto d = static_cast<Eigen::Index>(spec.dim);
    GroundTruth truth;
    truth.seed = spec.seed;
    truth.separation.assign(n, spec.baseline_separation);

    for (std::size_t i = 0; i < spec.regions.size(); ++i) {
        const auto& r = spec.regions[i];
        const double s0 = r.start_separation.value_or(spec.baseline_separation);
        const double s1 = r.end_separation.value_or(spec.baseline_separation);
        for (auto l = r.start; l <= r.end; ++l)
            truth.separation[l] = l <= r.peak ? detail::lerp_at(l, r.start, r.peak, s0, r.peak_separation)
                                              : detail::lerp_at(l, r.peak, r.end, r.peak_separation, s1);

        TruthRegion t{r.start, r.peak, r.end, r.peak_separation, {}, std::nullopt, std::nullopt};
        const auto dseed = r.direction_seed.value_or(detail::region_seed(spec.seed, i));
        t.direction = r.direction ? Eigen::Map<const Vector>(r.direction->data(), d).normalized()
                                  : random_direction(dseed, spec.dim);
        if (r.rotation_stop_offset) {
            Vector w = random_direction(SplitMix64(dseed ^ 0x5EED5EED5EED5EEDULL).next(), spec.dim);
            w -= w.dot(t.direction) * t.direction;
            t.settled_direction = w.normalized();
            t.handoff_layer = r.peak + *r.rotation_stop_offset;
        }
        truth.regions.push_back(std::move(t));
    }

    const Vector background = random_direction(detail::region_seed(spec.seed, spec.regions.size()), spec.dim);
    truth.layer_direction.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        // Owner is the deepest region starting at or before l (the first
        // region for layers ahead of every region).
        const TruthRegion* owner = truth.regions.empty() ? nullptr : &truth.regions.front();
        std::size_t owner_index = 0;
        for (std::size_t i = 0; i < truth.regions.size(); ++i)
            if (truth.regions[i].start <= l) owner = &truth.regions[i], owner_index = i;
        if (!owner) {
            truth.layer_direction[l] = background;
            continue;
        }
        const auto& spec_region = spec.regions[owner_index];
        if (owner->settled_direction && l > owner->peak) {
            const double t = std::min(1.0, static_cast<double>(l - owner->peak) /
                                               static_cast<double>(*spec_region.rotation_stop_offset));
            truth.layer_direction[l] = detail::slerp_orthonormal(owner->direction, *owner->settled_direction, t);
        } else {
            truth.layer_direction[l] = owner->direction;
        }
    }
    return truth;
}

// Values are rounded to binary32 so the set survives a CAZA round trip
// unchanged.
inline std::pair<ActivationSet, GroundTruth> generate_planted(const PlantSpec& spec) {
    auto truth = plant_truth(spec);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const auto np = static_cast<Eigen::Index>(spec.n_pos);
    const auto nn = static_cast<Eigen::Index>(spec.n_neg);
    const double sigma = spec.noise_sigma;
    const double rho = spec.layer_correlation;
    const double innovation = std::sqrt(1.0 - rho * rho);

    NormalStream rng(spec.seed);
    Matrix noise(np + nn, d);
    ActivationSet set;
    set.meta = {spec.concept_name, spec.model_name, "final-token", static_cast<std::uint32_t>(std::min(spec.n_pos, spec.n_neg))};
    for (std::size_t l = 0; l < spec.n_layers; ++l) {
        for (Eigen::Index i = 0; i < noise.rows(); ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                noise(i, j) = l == 0 ? rng.next() : rho * noise(i, j) + innovation * rng.next();
        const Vector half_gap =
            (0.5 * truth.separation[l] * sigma * std::sqrt(static_cast<double>(spec.dim))) * truth.layer_direction[l];
        Matrix pos = (sigma * noise.topRows(np)).rowwise() + half_gap.transpose();
        Matrix neg = (sigma * noise.bottomRows(nn)).rowwise() - half_gap.transpose();
        set.pos.push_back(pos.cast<float>().cast<double>());
        set.neg.push_back(neg.cast<float>().cast<double>());
    }
    return {std::move(set), std::move(truth)};
}

// ---- JSON ----------------------------------------------------------------

inline PlantSpec plant_spec_from_json(const nlohmann::json& j) {
    PlantSpec s;
    try {
        s.n_layers = j.at("n_layers").get<std::size_t>();
        s.dim = j.at("dim").get<std::size_t>();
        s.n_pos = j.value("n_pos", s.n_pos);
        s.n_neg = j.value("n_neg", s.n_neg);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.baseline_separation = j.value("baseline_separation", s.baseline_separation);
        s.layer_correlation = j.value("layer_correlation", s.layer_correlation);
        s.seed = j.value("seed", s.seed);
        s.concept_name = j.value("concept_name", s.concept_name);
        s.model_name = j.value("model_name", s.model_name);
        for (const auto& rj : j.value("regions", nlohmann::json::array())) {
            PlantedRegion r;
            r.start = rj.at("start").get<std::size_t>();
            r.peak = rj.at("peak").get<std::size_t>();
            r.end = rj.at("end").get<std::size_t>();
            r.peak_separation = rj.at("peak_separation").get<double>();
            if (rj.contains("start_separation")) r.start_separation = rj["start_separation"].get<double>();
            if (rj.contains("end_separation")) r.end_separation = rj["end_separation"].get<double>();
            if (rj.contains("direction_seed")) r.direction_seed = rj["direction_seed"].get<std::uint64_t>();
            if (rj.contains("direction")) r.direction = rj["direction"].get<std::vector<double>>();
            if (rj.contains("rotation_stop_offset")) r.rotation_stop_offset = rj["rotation_stop_offset"].get<std::size_t>();
            s.regions.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("plant spec: ") + e.what());
    }
    validate(s);
    return s;
}

inline nlohmann::json to_json(const PlantSpec& s) {
    nlohmann::json j{{"n_layers", s.n_layers},       {"dim", s.dim},
                     {"n_pos", s.n_pos},             {"n_neg", s.n_neg},
                     {"noise_sigma", s.noise_sigma}, {"baseline_separation", s.baseline_separation},
                     {"layer_correlation", s.layer_correlation},
                     {"seed", s.seed},               {"concept_name", s.concept_name},
                     {"model_name", s.model_name},   {"regions", nlohmann::json::array()}};
    for (const auto& r : s.regions) {
        nlohmann::json rj{{"start", r.start}, {"peak", r.peak}, {"end", r.end}, {"peak_separation", r.peak_separation}};
        if (r.start_separation) rj["start_separation"] = *r.start_separation;
        if (r.end_separation) rj["end_separation"] = *r.end_separation;
        if (r.direction_seed) rj["direction_seed"] = *r.direction_seed;
        if (r.direction) rj["direction"] = *r.direction;
        if (r.rotation_stop_offset) rj["rotation_stop_offset"] = *r.rotation_stop_offset;
        j["regions"].push_back(std::move(rj));
    }
    return j;
}

inline nlohmann::json to_json(const GroundTruth& t) {
    auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j{{"n_layers", t.separation.size()},
                     {"seed", t.seed},
                     {"separation", t.separation},
                     {"regions", nlohmann::json::array()}};
    for (const auto& r : t.regions) {
        nlohmann::json rj{{"start", r.start},
                          {"peak", r.peak},
                          {"end", r.end},
                          {"peak_separation", r.peak_separation},
                          {"direction", vec(r.direction)},
                          {"handoff_layer", r.handoff_layer ? nlohmann::json(*r.handoff_layer) : nlohmann::json(nullptr)}};
        j["regions"].push_back(std::move(rj));
    }
    return j;
}

} // namespace caz::synth
