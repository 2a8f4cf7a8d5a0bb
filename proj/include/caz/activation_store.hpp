#pragma once

// Activation data model and the CAZA on-disk format.
//
// CAZA layout (little-endian throughout):
//   0..3   magic "CAZA"
//   4..7   version (u32) = 1
//   8..23  n_layers, n_pos, n_neg, dim (u32 each)
//   24     dtype code, 1 = IEEE-754 binary32
//   25..31 reserved, zero
//   payload: per layer, pos rows (n_pos x dim) then neg rows (n_neg x dim),
//   row-major.
//
// Metadata lives beside the payload in "<stem>.meta.json".

#include "caz/error.hpp"
#include "caz/linalg.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace caz {

struct ConceptMeta {
    std::string concept_name;
    std::string model_name;
    std::string token_position = "final-token";
    std::optional<std::uint32_t> n_pairs;

    bool operator==(const ConceptMeta&) const = default;
};

// Per-layer contrastive activations. Layer 0 is the embedding output, the last
// layer the final residual state. Treat as immutable once validated.
struct ActivationSet {
    std::vector<Matrix> pos;
    std::vector<Matrix> neg;
    ConceptMeta meta;

    std::size_t n_layers() const noexcept { return pos.size(); }
    std::size_t dim() const noexcept { return pos.empty() ? 0 : static_cast<std::size_t>(pos.front().cols()); }
    std::size_t n_pos() const noexcept { return pos.empty() ? 0 : static_cast<std::size_t>(pos.front().rows()); }
    std::size_t n_neg() const noexcept { return neg.empty() ? 0 : static_cast<std::size_t>(neg.front().rows()); }
};

inline bool operator==(const ActivationSet& a, const ActivationSet& b) {
    if (a.meta != b.meta || a.pos.size() != b.pos.size() || a.neg.size() != b.neg.size()) return false;
    auto same = [](const Matrix& x, const Matrix& y) {
        return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
    };
    for (std::size_t l = 0; l < a.pos.size(); ++l)
        if (!same(a.pos[l], b.pos[l])) return false;
    for (std::size_t l = 0; l < a.neg.size(); ++l)
        if (!same(a.neg[l], b.neg[l])) return false;
    return true;
}

namespace detail {

[[noreturn]] inline void invalid(const std::string& invariant, const std::string& what) {
    throw Error(ErrorKind::Validation, invariant + ": " + what);
}

} // namespace detail

// Throws Error(Validation) naming the first violated invariant.
inline void validate(const ActivationSet& set) {
    using detail::invalid;
    const auto layers = set.pos.size();
    if (layers < 3) invalid("n_layers", "expected >= 3, got " + std::to_string(layers));
    if (set.neg.size() != layers)
        invalid("n_layers", "pos has " + std::to_string(layers) + " layers, neg has " + std::to_string(set.neg.size()));
    const auto d = set.pos.front().cols();
    const auto np = set.pos.front().rows();
    const auto nn = set.neg.front().rows();
    if (d < 1) invalid("dim", "expected >= 1, got " + std::to_string(d));
    if (np < 2) invalid("n_pos", "expected >= 2, got " + std::to_string(np));
    if (nn < 2) invalid("n_neg", "expected >= 2, got " + std::to_string(nn));
    for (std::size_t l = 0; l < layers; ++l) {
        const auto& p = set.pos[l];
        const auto& n = set.neg[l];
        if (p.rows() != np || n.rows() != nn || p.cols() != d || n.cols() != d)
            invalid("shape", "layer " + std::to_string(l) + " differs from layer 0");
        if (!p.allFinite() || !n.allFinite()) invalid("finite", "non-finite value in layer " + std::to_string(l));
    }
    if (set.meta.n_pairs && *set.meta.n_pairs < 1) invalid("n_pairs", "expected >= 1 when present");
}

inline std::filesystem::path meta_path_for(const std::filesystem::path& caza) {
    auto p = caza;
    p.replace_extension(".meta.json");
    return p;
}

inline nlohmann::json meta_to_json(const ConceptMeta& meta) {
    nlohmann::json j;
    j["concept_name"] = meta.concept_name;
    j["model_name"] = meta.model_name;
    j["token_position"] = meta.token_position;
    j["n_pairs"] = meta.n_pairs ? nlohmann::json(*meta.n_pairs) : nlohmann::json(nullptr);
    return j;
}

inline ConceptMeta meta_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::Format, "metadata sidecar is not a JSON object");
    ConceptMeta meta;
    try {
        meta.concept_name = j.value("concept_name", std::string{});
        meta.model_name = j.value("model_name", std::string{});
        meta.token_position = j.value("token_position", std::string{});
        if (j.contains("n_pairs") && !j.at("n_pairs").is_null()) meta.n_pairs = j.at("n_pairs").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("metadata sidecar: ") + e.what());
    }
    return meta;
}

namespace detail {

inline constexpr std::array<unsigned char, 4> kMagic{'C', 'A', 'Z', 'A'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr unsigned char kDtypeF32 = 1;
inline constexpr std::size_t kHeaderBytes = 32;

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_matrix(std::string& out, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(is), {});
}

} // namespace detail

// Serializes the binary payload only. Byte content is a pure function of the
// matrices; doubles are narrowed to binary32.
inline std::string encode_caza(const ActivationSet& set) {
    validate(set);
    constexpr double kFloatMax = std::numeric_limits<float>::max();
    for (std::size_t l = 0; l < set.n_layers(); ++l)
        if ((set.pos[l].array().abs() > kFloatMax).any() || (set.neg[l].array().abs() > kFloatMax).any())
            detail::invalid("finite", "value overflows binary32 in layer " + std::to_string(l));

    std::string out;
    out.reserve(detail::kHeaderBytes + set.n_layers() * (set.n_pos() + set.n_neg()) * set.dim() * 4);
    out.append(reinterpret_cast<const char*>(detail::kMagic.data()), detail::kMagic.size());
    detail::put_u32(out, detail::kVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(set.n_layers()));
    detail::put_u32(out, static_cast<std::uint32_t>(set.n_pos()));
    detail::put_u32(out, static_cast<std::uint32_t>(set.n_neg()));
    detail::put_u32(out, static_cast<std::uint32_t>(set.dim()));
    out.push_back(static_cast<char>(detail::kDtypeF32));
    out.append(7, '\0');
    for (std::size_t l = 0; l < set.n_layers(); ++l) {
        detail::put_matrix(out, set.pos[l]);
        detail::put_matrix(out, set.neg[l]);
    }
    return out;
}

inline ActivationSet decode_caza(const std::string& bytes) {
    using detail::get_u32;
    if (bytes.size() < detail::kHeaderBytes) throw Error(ErrorKind::Format, "file shorter than the 32-byte header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (!std::equal(detail::kMagic.begin(), detail::kMagic.end(), p)) throw Error(ErrorKind::Format, "bad magic");
    if (const auto version = get_u32(p + 4); version != detail::kVersion)
        throw Error(ErrorKind::Format, "unsupported version " + std::to_string(version));
    const std::uint64_t layers = get_u32(p + 8);
    const std::uint64_t np = get_u32(p + 12);
    const std::uint64_t nn = get_u32(p + 16);
    const std::uint64_t d = get_u32(p + 20);
    if (p[24] != detail::kDtypeF32) throw Error(ErrorKind::Format, "unsupported dtype code " + std::to_string(p[24]));

    // All factors are < 2^32, so the product of any two fits; guard the rest.
    const std::uint64_t rows = np + nn;
    const std::uint64_t per_layer = rows * d;
    if (layers != 0 && per_layer > (std::numeric_limits<std::uint64_t>::max() / 4) / layers)
        throw Error(ErrorKind::Format, "declared sizes overflow");
    const std::uint64_t expected = detail::kHeaderBytes + layers * per_layer * 4;
    if (bytes.size() != expected)
        throw Error(ErrorKind::Format, "payload is " + std::to_string(bytes.size() - detail::kHeaderBytes) +
                                           " bytes, header declares " + std::to_string(expected - detail::kHeaderBytes));

    ActivationSet set;
    set.pos.reserve(layers);
    set.neg.reserve(layers);
    const unsigned char* cur = p + detail::kHeaderBytes;
    auto take = [&cur](std::uint64_t n_rows, std::uint64_t n_cols) {
        Matrix m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c, cur += 4) m(r, c) = std::bit_cast<float>(get_u32(cur));
        return m;
    };
    for (std::uint64_t l = 0; l < layers; ++l) {
        set.pos.push_back(take(np, d));
        set.neg.push_back(take(nn, d));
    }
    return set;
}

inline void write_activation_set(const ActivationSet& set, const std::filesystem::path& path) {
    const auto bytes = encode_caza(set);
    detail::write_file(path, bytes);
    detail::write_file(meta_path_for(path), meta_to_json(set.meta).dump(2) + "\n");
}

// Reads the payload and, when present, the metadata sidecar.
inline ActivationSet read_activation_set(const std::filesystem::path& path) {
    auto set = decode_caza(detail::read_file(path));
    const auto meta = meta_path_for(path);
    if (std::filesystem::exists(meta)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(detail::read_file(meta));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::Format, meta.string() + ": " + e.what());
        }
        set.meta = meta_from_json(j);
    }
    validate(set);
    return set;
}

} // namespace caz
