#pragma once

// Command-line pipeline: synth, metrics, detect, extract, align.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error,
// 3 degenerate computation. Diagnostics go to the error stream; data only
// goes to the declared output files.

#include "caz/activation_store.hpp"
#include "caz/analysis.hpp"
#include "caz/detection.hpp"
#include "caz/error.hpp"
#include "caz/extraction.hpp"
#include "caz/metrics.hpp"
#include "caz/report.hpp"
#include "caz/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace caz::cli {

enum class Subcommand { Synth, Metrics, Detect, Extract, Align };

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kDegenerate = 3 };

struct RunConfig {
    Subcommand subcommand = Subcommand::Detect;
    std::vector<std::string> inputs; // align takes two
    std::string out;
    std::string spec;                // synth
    std::string truth;               // synth; defaults beside --out
    std::string svg;
    std::optional<std::size_t> k;
    DetectionSettings settings;
    std::string mode = "scored";     // scored | velocity
    std::string method = "dom";      // dom | windowed-pca | delta-pca | handoff
    std::optional<std::size_t> region;
    double omega_threshold = kDefaultOmegaThreshold;
    std::vector<double> depths{0.3, 0.5, 0.7};
    double min_separation = kDefaultMinSeparation;
    std::string calib_a;
    std::string calib_b;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) { caz::detail::write_file(path, text); }

inline nlohmann::json read_json(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(caz::detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

inline CazProfile detect(const LayerMetrics& m, const RunConfig& cfg) {
    if (cfg.mode == "velocity") {
        CazProfile p;
        p.settings = cfg.settings;
        p.regions.push_back(detect_single_region(m, cfg.settings));
        return p;
    }
    return detect_profile(m, cfg.settings);
}

inline std::string title_for(const ActivationSet& set) {
    std::string t = set.meta.concept_name.empty() ? std::string("concept") : set.meta.concept_name;
    if (!set.meta.model_name.empty()) t += " / " + set.meta.model_name;
    return t;
}

inline void run_synth(const RunConfig& cfg) {
    const auto spec = synth::plant_spec_from_json(read_json(cfg.spec));
    const auto [set, truth] = synth::generate_planted(spec);
    write_activation_set(set, cfg.out);
    std::filesystem::path truth_path = cfg.truth;
    if (truth_path.empty()) truth_path = std::filesystem::path(cfg.out).replace_extension(".truth.json");
    write_text(truth_path, dump_json(synth::to_json(truth)));
}

inline void run_metrics(const RunConfig& cfg) {
    const auto set = read_activation_set(cfg.inputs.at(0));
    const auto m = compute_layer_metrics(set, cfg.k);
    write_text(cfg.out, metrics_csv(m));
    if (!cfg.svg.empty()) write_text(cfg.svg, svg_report(m, nullptr, title_for(set)));
}

inline void run_detect(const RunConfig& cfg) {
    const auto set = read_activation_set(cfg.inputs.at(0));
    const auto m = compute_layer_metrics(set, cfg.k);
    const auto profile = detect(m, cfg);
    write_text(cfg.out, dump_json(to_json(profile)));
    if (!cfg.svg.empty()) write_text(cfg.svg, svg_report(m, &profile, title_for(set)));
}

inline void run_extract(const RunConfig& cfg, std::ostream& err) {
    const auto set = read_activation_set(cfg.inputs.at(0));
    const auto m = compute_layer_metrics(set, cfg.k);
    const auto profile = detect(m, cfg);
    const auto index = cfg.region.value_or(profile.peak_region_index);
    if (index >= profile.n_regions())
        throw Error(ErrorKind::Validation, "region: index " + std::to_string(index) + " but profile has " +
                                               std::to_string(profile.n_regions()) + " regions");
    const auto& region = profile.regions[index];
    ConceptDirection dir;
    if (cfg.method == "dom") {
        dir = extract_single_layer(set, region.peak_layer);
    } else if (cfg.method == "windowed-pca") {
        dir = extract_windowed_pca(set, region);
    } else if (cfg.method == "delta-pca") {
        dir = extract_delta_pca(set, region);
    } else {
        const auto h = find_handoff(m, region, cfg.omega_threshold);
        err << "handoff layer " << h.handoff_layer << " (omega " << h.omega_at_handoff << ")\n";
        dir = extract_handoff(set, m, region, cfg.omega_threshold);
    }
    write_text(cfg.out, dump_json(to_json(dir)));
}

inline void run_align(const RunConfig& cfg, std::ostream& err) {
    const auto a = read_activation_set(cfg.inputs.at(0));
    const auto b = read_activation_set(cfg.inputs.at(1));
    if (a.dim() != b.dim())
        throw Error(ErrorKind::DimensionMismatch, "model dims " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    Calibration calib = identity_calibration(a.dim());
    if (!cfg.calib_a.empty()) {
        calib.source = direction_rows_from_json(read_json(cfg.calib_a));
        calib.target = direction_rows_from_json(read_json(cfg.calib_b));
    } else {
        err << "no calibration supplied; comparing without rotation\n";
    }
    const auto report = depth_matched_alignment(a, b, cfg.depths, calib, cfg.min_separation);
    if (report.rotation_rank_deficient) err << "warning: RankDeficient calibration; rotation is not unique\n";
    write_text(cfg.out, dump_json(to_json(report)));
}

} // namespace detail

// Parses argv. Returns the config, or the exit code to use immediately
// (help requested or usage error).
inline std::variant<RunConfig, int> parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Layer-wise concept separation: metrics, region detection, direction extraction, alignment", "caz"};
    app.require_subcommand(1);

    auto fraction = [](const std::string& name) {
        return CLI::Validator(
            [](std::string& v) -> std::string {
                double x = 0;
                try {
                    x = std::stod(v);
                } catch (...) {
                    return "not a number";
                }
                return x > 0.0 && x < 1.0 ? std::string{} : std::string("must be in (0, 1)");
            },
            "in (0,1)", name);
    };
    auto add_detection = [&](CLI::App* sub) {
        sub->add_option("--k", cfg.k, "Velocity smoothing half-width (default max(1, L/24))")->check(CLI::PositiveNumber);
        sub->add_option("--prominence-floor", cfg.settings.prominence_floor_fraction, "Peak prominence floor, fraction of max S")
            ->check(fraction("prominence-floor"));
        sub->add_option("--valley-merge", cfg.settings.valley_merge_fraction, "Valley merge depth, fraction of max S")
            ->check(fraction("valley-merge"));
        sub->add_option("--mode", cfg.mode, "Detector")->check(CLI::IsMember({"scored", "velocity"}));
    };

    auto* synth_cmd = app.add_subcommand("synth", "Generate a planted synthetic activation set");
    synth_cmd->add_option("--spec", cfg.spec, "PlantSpec JSON")->required();
    synth_cmd->add_option("--out", cfg.out, "Output .caza path")->required();
    synth_cmd->add_option("--truth", cfg.truth, "Ground-truth JSON path (default <out>.truth.json)");

    auto* metrics_cmd = app.add_subcommand("metrics", "Write the layer-wise curves as CSV");
    metrics_cmd->add_option("--in", cfg.inputs, "Input .caza")->required()->expected(1);
    metrics_cmd->add_option("--out", cfg.out, "Output CSV")->required();
    metrics_cmd->add_option("--k", cfg.k, "Velocity smoothing half-width")->check(CLI::PositiveNumber);
    metrics_cmd->add_option("--svg", cfg.svg, "Also write an SVG plot");

    auto* detect_cmd = app.add_subcommand("detect", "Detect allocation regions, write profile JSON");
    detect_cmd->add_option("--in", cfg.inputs, "Input .caza")->required()->expected(1);
    detect_cmd->add_option("--out", cfg.out, "Output profile JSON")->required();
    detect_cmd->add_option("--svg", cfg.svg, "Also write an SVG report");
    add_detection(detect_cmd);

    auto* extract_cmd = app.add_subcommand("extract", "Extract a concept direction from a detected region");
    extract_cmd->add_option("--in", cfg.inputs, "Input .caza")->required()->expected(1);
    extract_cmd->add_option("--out", cfg.out, "Output direction JSON")->required();
    extract_cmd->add_option("--method", cfg.method, "Extraction method")
        ->check(CLI::IsMember({"dom", "windowed-pca", "delta-pca", "handoff"}));
    extract_cmd->add_option("--region", cfg.region, "Region index (default: peak region)");
    extract_cmd->add_option("--omega-threshold", cfg.omega_threshold, "Handoff angular-velocity threshold")
        ->check(fraction("omega-threshold"));
    add_detection(extract_cmd);

    auto* align_cmd = app.add_subcommand("align", "Depth-matched cross-model alignment");
    align_cmd->add_option("--in", cfg.inputs, "Model A and model B .caza files")->required()->expected(2);
    align_cmd->add_option("--out", cfg.out, "Output alignment JSON")->required();
    align_cmd->add_option("--depths", cfg.depths, "Depth fractions")->delimiter(',')->check(fraction("depths"));
    align_cmd->add_option("--min-separation", cfg.min_separation, "Exclusion threshold on S at the probe layer")
        ->check(CLI::NonNegativeNumber);
    auto* ca = align_cmd->add_option("--calib-a", cfg.calib_a, "Calibration directions in model A's space");
    auto* cb = align_cmd->add_option("--calib-b", cfg.calib_b, "Calibration directions in model B's space");
    ca->needs(cb);
    cb->needs(ca);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kUsage;
    }

    if (synth_cmd->parsed()) cfg.subcommand = Subcommand::Synth;
    else if (metrics_cmd->parsed()) cfg.subcommand = Subcommand::Metrics;
    else if (detect_cmd->parsed()) cfg.subcommand = Subcommand::Detect;
    else if (extract_cmd->parsed()) cfg.subcommand = Subcommand::Extract;
    else cfg.subcommand = Subcommand::Align;
    return cfg;
}

inline int run(const RunConfig& cfg, std::ostream& err) {
    try {
        switch (cfg.subcommand) {
        case Subcommand::Synth: detail::run_synth(cfg); break;
        case Subcommand::Metrics: detail::run_metrics(cfg); break;
        case Subcommand::Detect: detail::run_detect(cfg); break;
        case Subcommand::Extract: detail::run_extract(cfg, err); break;
        case Subcommand::Align: detail::run_align(cfg, err); break;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_degenerate(e.kind()) ? kDegenerate : kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}

inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    auto parsed = parse_args(argc, argv, out, err);
    if (const auto* code = std::get_if<int>(&parsed)) return *code;
    return run(std::get<RunConfig>(parsed), err);
}

} // namespace caz::cli
