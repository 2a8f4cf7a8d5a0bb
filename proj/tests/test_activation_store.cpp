#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <limits>

using namespace caz;
using namespace caz::testing;

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

std::string bytes_of(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

void put_bytes(const std::filesystem::path& p, const std::string& b) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
}

} // namespace

TEST_CASE("validate accepts a conforming set", "[store]") {
    NormalStream rng(1);
    CHECK_NOTHROW(validate(random_set(rng, 3, 2, 2, 1)));
}

TEST_CASE("validate names the first violated invariant", "[store]") {
    NormalStream rng(2);
    auto expect_invariant = [](const ActivationSet& s, const std::string& name) {
        try {
            validate(s);
            FAIL("validation passed unexpectedly");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Validation);
            CHECK(e.detail().rfind(name, 0) == 0);
        }
    };
    expect_invariant(random_set(rng, 2, 3, 3, 4), "n_layers");
    expect_invariant(random_set(rng, 4, 1, 3, 4), "n_pos");
    expect_invariant(random_set(rng, 4, 3, 1, 4), "n_neg");
    expect_invariant(random_set(rng, 4, 3, 3, 0), "dim");

    auto ragged = random_set(rng, 4, 3, 3, 4);
    ragged.pos[2] = Matrix::Zero(4, 4);
    expect_invariant(ragged, "shape");

    auto nan = random_set(rng, 4, 3, 3, 4);
    nan.neg[3](1, 1) = std::numeric_limits<double>::quiet_NaN();
    expect_invariant(nan, "finite");

    auto inf = random_set(rng, 4, 3, 3, 4);
    inf.pos[0](0, 0) = std::numeric_limits<double>::infinity();
    expect_invariant(inf, "finite");
}

TEST_CASE("CAZA round trip is bit-exact and deterministic", "[store]") {
    const auto dir = tmp_dir("store_roundtrip");
    NormalStream rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto set = random_set(rng, 3 + static_cast<std::size_t>(trial), 2 + trial, 3, 1 + 3 * trial);
        const auto a = dir / ("a" + std::to_string(trial) + ".caza");
        const auto b = dir / ("b" + std::to_string(trial) + ".caza");
        write_activation_set(set, a);
        write_activation_set(set, b);
        CHECK(read_activation_set(a) == set);
        CHECK(bytes_of(a) == bytes_of(b));
        CHECK(bytes_of(meta_path_for(a)) == bytes_of(meta_path_for(b)));
    }
}

TEST_CASE("CAZA header layout", "[store]") {
    NormalStream rng(4);
    auto set = random_set(rng, 3, 2, 3, 5);
    set.pos[0](0, 0) = 1.0f;
    const auto bytes = encode_caza(set);
    REQUIRE(bytes.size() == 32 + 3 * (2 + 3) * 5 * 4);
    CHECK(bytes.substr(0, 4) == "CAZA");
    const unsigned char expected_header[32] = {'C', 'A', 'Z', 'A', 1, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0,
                                               3,   0,   0,   0,   5, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0};
    CHECK(std::equal(std::begin(expected_header), std::end(expected_header),
                     reinterpret_cast<const unsigned char*>(bytes.data())));
    // 1.0f is 0x3F800000, stored little-endian
    CHECK(static_cast<unsigned char>(bytes[32]) == 0x00);
    CHECK(static_cast<unsigned char>(bytes[34]) == 0x80);
    CHECK(static_cast<unsigned char>(bytes[35]) == 0x3F);
}

TEST_CASE("writing rejects invalid sets", "[store]") {
    const auto dir = tmp_dir("store_invalid");
    NormalStream rng(5);
    auto set = random_set(rng, 3, 2, 2, 2);
    set.pos[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(kind_of([&] { write_activation_set(set, dir / "nan.caza"); }) == ErrorKind::Validation);
    set.pos[1](0, 0) = 1e300;
    CHECK(kind_of([&] { write_activation_set(set, dir / "big.caza"); }) == ErrorKind::Validation);
}

TEST_CASE("reading rejects malformed files", "[store]") {
    const auto dir = tmp_dir("store_malformed");
    NormalStream rng(6);
    const auto set = random_set(rng, 5, 2, 2, 3);
    const auto good = encode_caza(set);

    SECTION("bad magic") {
        put_bytes(dir / "m.caza", "XXXX" + good.substr(4));
        CHECK(kind_of([&] { read_activation_set(dir / "m.caza"); }) == ErrorKind::Format);
    }
    SECTION("unsupported version") {
        auto b = good;
        b[4] = 2;
        put_bytes(dir / "v.caza", b);
        CHECK(kind_of([&] { read_activation_set(dir / "v.caza"); }) == ErrorKind::Format);
    }
    SECTION("unsupported dtype") {
        auto b = good;
        b[24] = 2;
        put_bytes(dir / "t.caza", b);
        CHECK(kind_of([&] { read_activation_set(dir / "t.caza"); }) == ErrorKind::Format);
    }
    SECTION("header declares 5 layers, payload holds 4") {
        put_bytes(dir / "short.caza", good.substr(0, good.size() - (2 + 2) * 3 * 4));
        CHECK(kind_of([&] { read_activation_set(dir / "short.caza"); }) == ErrorKind::Format);
    }
    SECTION("trailing bytes") {
        put_bytes(dir / "long.caza", good + std::string(4, '\0'));
        CHECK(kind_of([&] { read_activation_set(dir / "long.caza"); }) == ErrorKind::Format);
    }
    SECTION("truncated header") {
        put_bytes(dir / "h.caza", good.substr(0, 20));
        CHECK(kind_of([&] { read_activation_set(dir / "h.caza"); }) == ErrorKind::Format);
    }
    SECTION("consistent sizes but too few layers is a validation error") {
        auto b = good.substr(0, 32 + 2 * (2 + 2) * 3 * 4);
        b[8] = 2;
        put_bytes(dir / "two.caza", b);
        CHECK(kind_of([&] { read_activation_set(dir / "two.caza"); }) == ErrorKind::Validation);
    }
    SECTION("missing file") {
        CHECK(kind_of([&] { read_activation_set(dir / "absent.caza"); }) == ErrorKind::Io);
    }
}

TEST_CASE("metadata sidecar", "[store]") {
    const auto dir = tmp_dir("store_meta");
    NormalStream rng(7);
    auto set = random_set(rng, 3, 2, 2, 2);
    set.meta = {"credibility", "gpt2", "final-token", std::nullopt};
    write_activation_set(set, dir / "c.caza");
    REQUIRE(std::filesystem::exists(dir / "c.meta.json"));
    const auto j = nlohmann::json::parse(bytes_of(dir / "c.meta.json"));
    CHECK(j.size() == 4);
    CHECK(j.at("concept_name") == "credibility");
    CHECK(j.at("n_pairs").is_null());
    CHECK(read_activation_set(dir / "c.caza").meta == set.meta);

    set.meta.n_pairs = 0;
    CHECK(kind_of([&] { validate(set); }) == ErrorKind::Validation);
}
