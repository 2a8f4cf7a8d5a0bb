#include "planted_cases.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include "caz/oracles.hpp"

using namespace caz;
using namespace caz::testing;
using Catch::Approx;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected caz::Error");
    return ErrorKind::Io;
}

} // namespace

TEST_CASE("find_peaks", "[detection]") {
    CHECK(find_peaks({0, 1, 0}) == std::vector<std::size_t>{1});
    CHECK(find_peaks({0, 2, 2, 0}) == std::vector<std::size_t>{1});
    CHECK(find_peaks({3, 1, 2, 1, 4}) == std::vector<std::size_t>{0, 2, 4});
    CHECK(find_peaks({1, 1, 1}).empty());
    CHECK(find_peaks({0, 1, 2}) == std::vector<std::size_t>{2});
    CHECK(find_peaks({2, 2, 1}) == std::vector<std::size_t>{0});
    CHECK(find_peaks({0, 2, 2, 3}) == std::vector<std::size_t>{3});
}

TEST_CASE("prominence", "[detection]") {
    CHECK(prominence({0, 1, 0}, 1) == 1.0);
    CHECK(prominence({0, 3, 1, 2, 0}, 1) == 3.0);
    CHECK(prominence({0, 3, 1, 2, 0}, 3) == 1.0);
    CHECK(prominence({1, 2, 3, 4}, 3) == 3.0);
    CHECK(prominence({4, 2, 3, 0}, 0) == 4.0);
}

TEST_CASE("prominence equals the exhaustive oracle", "[detection][oracle]") {
    SplitMix64 rng(21);
    std::size_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Curve c(uniform_int(rng, 5, 80));
        for (auto& x : c) x = static_cast<double>(uniform_int(rng, 0, 9));
        for (auto p : find_peaks(c)) {
            CHECK(prominence(c, p) == synth::oracle_prominence(c, p));
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("global maximum bases run to both ends", "[detection][property]") {
    SplitMix64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        Curve c(uniform_int(rng, 5, 40));
        for (auto& x : c) x = rng.uniform();
        const auto p = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
        const auto left = p > 0 ? *std::min_element(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(p)) : -1.0;
        const auto right = p + 1 < c.size() ? *std::min_element(c.begin() + static_cast<std::ptrdiff_t>(p) + 1, c.end()) : -1.0;
        const double base = p == 0 ? right : p + 1 == c.size() ? left : std::max(left, right);
        CHECK(prominence(c, p) == c[p] - base);
        // an endpoint maximum sees the whole curve on its single side
        if (p == 0 || p + 1 == c.size()) CHECK(prominence(c, p) == c[p] - *std::min_element(c.begin(), c.end()));
    }
}

TEST_CASE("caz_score", "[detection]") {
    CHECK(caz_score(0.2, 0.4, 0.3, 0.2, 9, 36) == Approx(0.625).epsilon(1e-15));
    // coherence factor is exactly 2 at mean coherence, width factor exactly 1 at full depth
    CHECK(caz_score(1.0, 1.0, 0.37, 0.37, 20, 20) == 2.0);
    CHECK(caz_score(0.3, 0.6, 0.2, 0.5, 7, 7) == Approx(0.5 * 1.4));
    CHECK(kind_of([] { caz_score(1, 0, 1, 1, 1, 1); }) == ErrorKind::DegenerateDispersion);
    CHECK(kind_of([] { caz_score(1, 1, 1, 0, 1, 1); }) == ErrorKind::DegenerateDispersion);
}

TEST_CASE("caz_score monotonicity", "[detection][property]") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const double prom = rng.uniform(), ms = 0.1 + rng.uniform(), pc = rng.uniform(), mc = 0.1 + rng.uniform();
        const auto L = uniform_int(rng, 3, 80);
        const auto w = uniform_int(rng, 1, L - 1);
        const double base = caz_score(prom, ms, pc, mc, w, L);
        CHECK(caz_score(prom + 0.01, ms, pc, mc, w, L) > base);
        CHECK(caz_score(prom + 0.01, ms, pc + 0.01, mc, w, L) > caz_score(prom + 0.01, ms, pc, mc, w, L));
        CHECK(caz_score(prom + 0.01, ms, pc, mc, w + 1, L) > caz_score(prom + 0.01, ms, pc, mc, w, L));
    }
}

TEST_CASE("classify_strength", "[detection]") {
    CHECK(classify_strength(0.6) == Strength::Major);
    CHECK(classify_strength(0.3) == Strength::Strong);
    CHECK(classify_strength(0.1) == Strength::Moderate);
    CHECK(classify_strength(0.01) == Strength::Gentle);
    CHECK(classify_strength(0.5) == Strength::Strong);
    CHECK(classify_strength(0.2) == Strength::Moderate);
    CHECK(classify_strength(0.05) == Strength::Gentle);
    CHECK(classify_strength(0.0) == Strength::Gentle);
    // monotone: never steps down as the score grows
    Strength prev = Strength::Gentle;
    for (int i = 0; i <= 1000; ++i) {
        const auto s = classify_strength(i * 0.001);
        CHECK(static_cast<int>(s) <= static_cast<int>(prev));
        prev = s;
    }
}

TEST_CASE("classify_kind", "[detection]") {
    CazRegion r;
    const DetectionSettings settings;
    for (std::size_t p : {0, 1, 5}) {
        r.peak_layer = p;
        CHECK(classify_kind(r, settings) == (p <= 1 ? RegionKind::Embedding : RegionKind::Active));
    }
}

TEST_CASE("settings validation", "[detection]") {
    DetectionSettings s;
    CHECK_NOTHROW(s.check());
    s.valley_merge_fraction = 1.0;
    CHECK(kind_of([&] { s.check(); }) == ErrorKind::Validation);
    s = {};
    s.sustain_layers = 0;
    CHECK(kind_of([&] { s.check(); }) == ErrorKind::Validation);
}

TEST_CASE("single-region detector on a clean ramp", "[detection]") {
    // 0 -> 1 over layers 2..8, then flat
    Curve s(16, 1.0);
    for (std::size_t l = 0; l <= 8; ++l) s[l] = l <= 2 ? 0.0 : static_cast<double>(l - 2) / 6.0;
    const auto r = detect_single_region(metrics_from_curve(s));
    CHECK(r.start_layer >= 2);
    CHECK(r.start_layer <= 3);
    CHECK(r.peak_layer == 8);
    CHECK(r.end_layer == 15);
}

TEST_CASE("single-region detector exit on a triangle", "[detection]") {
    Curve s(20, 0.0);
    for (std::size_t l = 4; l <= 16; ++l) s[l] = l <= 10 ? 0.2 * static_cast<double>(l - 4) : 1.2 - 0.2 * static_cast<double>(l - 10);
    const auto m = metrics_from_curve(s);
    const auto r = detect_single_region(m);
    CHECK(r.peak_layer == 10);
    // v(l) = (S(l+1) - S(l-2)) / 3 first turns negative at 11
    CHECK(r.end_layer == 11);
    CHECK(m.velocity[11] < 0.0);
    CHECK(m.velocity[10] > 0.0);
}

TEST_CASE("single-region detector errors and fallbacks", "[detection]") {
    CHECK(kind_of([] { detect_single_region(metrics_from_curve(Curve(12, 0.4))); }) == ErrorKind::NoAllocationDetected);
    // a single step: velocity never turns negative, so exit falls back to the last layer
    Curve s{0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    const auto m = metrics_from_curve(s);
    REQUIRE(m.velocity[0] > 0.0);
    REQUIRE(m.velocity[3] == 0.0);
    const auto r = detect_single_region(m);
    CHECK(r.peak_layer == 1);
    CHECK(r.start_layer == 0);
    CHECK(r.end_layer == 7);
}

TEST_CASE("single-region peak is always argmax S", "[detection][property]") {
    SplitMix64 rng(24);
    for (int trial = 0; trial < 200; ++trial) {
        Curve s(uniform_int(rng, 6, 60));
        for (auto& x : s) x = rng.uniform();
        const auto m = metrics_from_curve(s);
        if (*std::max_element(m.velocity.begin(), m.velocity.end()) <= 0.0) continue;
        const auto r = detect_single_region(m);
        CHECK(r.peak_layer == static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin()));
        CHECK(r.start_layer <= r.peak_layer);
        CHECK(r.end_layer >= r.peak_layer);
    }
}

TEST_CASE("profile on curves", "[detection]") {
    SECTION("unimodal") {
        const auto p = detect_profile(metrics_from_curve({0.1, 0.3, 0.6, 1.0, 0.7, 0.4, 0.2}));
        REQUIRE(p.n_regions() == 1);
        CHECK(p.regions[0].start_layer == 0);
        CHECK(p.regions[0].peak_layer == 3);
        CHECK(p.regions[0].end_layer == 6);
        CHECK(p.regions[0].rise_fall_asymmetry == 1.0);
    }
    SECTION("deep valley splits at the saddle") {
        const auto p = detect_profile(metrics_from_curve({0.1, 0.4, 1.0, 0.5, 0.3, 0.3, 0.6, 0.9, 0.2}));
        REQUIRE(p.n_regions() == 2);
        CHECK(p.regions[0].end_layer == 4);
        CHECK(p.regions[1].start_layer == 4);
        CHECK(p.regions[1].peak_layer == 7);
        CHECK(p.regions[1].end_layer == 8);
        CHECK(p.peak_region_index == 0);
    }
    SECTION("valley 2% of max merges, keeping the higher peak") {
        const auto p = detect_profile(metrics_from_curve({0.1, 0.4, 0.9, 0.88, 1.0, 0.4, 0.1}));
        REQUIRE(p.n_regions() == 1);
        CHECK(p.regions[0].peak_layer == 4);
        CHECK(p.regions[0].start_layer == 0);
        CHECK(p.regions[0].end_layer == 6);
    }
    SECTION("valley 10% of max stays split") {
        const auto p = detect_profile(metrics_from_curve({0.1, 0.4, 0.9, 0.8, 1.0, 0.4, 0.1}));
        REQUIRE(p.n_regions() == 2);
        CHECK(p.regions[0].end_layer == 3);
        CHECK(p.peak_region_index == 1);
    }
    SECTION("prominence floor drops a bump") {
        const auto p = detect_profile(metrics_from_curve({0.1, 1.0, 0.5, 0.502, 0.5, 0.2}));
        CHECK(p.n_regions() == 1);
    }
    SECTION("flat curve") {
        CHECK(kind_of([] { detect_profile(metrics_from_curve(Curve(8, 0.0))); }) == ErrorKind::NoAllocationDetected);
        CHECK(kind_of([] { detect_profile(metrics_from_curve(Curve(8, 0.5))); }) == ErrorKind::NoAllocationDetected);
    }
    SECTION("embedding peak") {
        const auto p = detect_profile(metrics_from_curve({0.5, 1.0, 0.6, 0.3, 0.2, 0.1}));
        CHECK(p.regions[0].kind == RegionKind::Embedding);
    }
}

TEST_CASE("profile invariants on random curves", "[detection][property]") {
    SplitMix64 rng(25);
    for (int trial = 0; trial < 300; ++trial) {
        Curve s(uniform_int(rng, 3, 60));
        for (auto& x : s) x = rng.uniform();
        const auto m = metrics_from_curve(s);
        const auto p = detect_profile(m);
        REQUIRE(p.n_regions() >= 1);
        const double smax = *std::max_element(s.begin(), s.end());
        CHECK(p.regions.front().start_layer == 0);
        CHECK(p.regions.back().end_layer == s.size() - 1);
        for (std::size_t i = 0; i < p.n_regions(); ++i) {
            const auto& r = p.regions[i];
            CHECK(r.start_layer <= r.peak_layer);
            CHECK(r.peak_layer <= r.end_layer);
            CHECK(r.prominence >= p.settings.prominence_floor_fraction * smax);
            if (i > 0) CHECK(r.start_layer == p.regions[i - 1].end_layer);
        }
        CHECK(p.regions[p.peak_region_index].peak_separation == smax);
    }
}

TEST_CASE("profile recovers planted peaks", "[detection][synth]") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto c = profile_case(seed);
        const auto [set, truth] = synth::generate_planted(c.spec);
        const auto p = detect_profile(compute_layer_metrics(set));
        REQUIRE(p.n_regions() == c.peaks.size());
        for (std::size_t i = 0; i < c.peaks.size(); ++i) CHECK(p.regions[i].peak_layer == c.peaks[i]);
        for (std::size_t i = 0; i < c.valleys.size(); ++i) {
            const auto got = static_cast<long>(p.regions[i].end_layer);
            CHECK(std::abs(got - static_cast<long>(c.valleys[i])) <= 1);
        }
    }
}

TEST_CASE("velocity detector recovers planted ramps", "[detection][synth]") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto c = ramp_case(seed);
        const auto [set, truth] = synth::generate_planted(c.spec);
        const auto r = detect_single_region(compute_layer_metrics(set));
        CHECK(std::abs(static_cast<long>(r.start_layer) - static_cast<long>(c.ramp_start)) <= 1);
        CHECK(std::abs(static_cast<long>(r.end_layer) - static_cast<long>(c.ramp_end)) <= 1);
    }
}
