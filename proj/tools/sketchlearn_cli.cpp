// Command-line front end. Every operation goes through the C API in
// sketchlearn.h; this file only parses flags, assembles JSON configs and
// moves bytes between files and the library.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sketchlearn.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int exit_code_for(int sl_code) {
    switch (sl_code) {
        case SL_OK:
            return kExitOk;
        case SL_ERR_INVALID_ARGUMENT:
        case SL_ERR_DIMENSION_MISMATCH:
        case SL_ERR_PARSE:
            return kExitUsage;
        default:
            return kExitRuntime;
    }
}

// Returns the mapped exit code, printing the library error when rc != SL_OK.
int check(int rc) {
    if (rc != SL_OK)
        std::cerr << "error: " << sl_last_error_message() << "\n";
    return exit_code_for(rc);
}

struct StringOut {
    char* ptr = nullptr;
    ~StringOut() { sl_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

Json load_json_or_die(const std::string& path, int& rc_out) {
    std::ifstream in(path);
    if (!in.good()) {
        std::cerr << "error: cannot open '" << path << "'\n";
        rc_out = kExitRuntime;
        return {};
    }
    try {
        Json j;
        in >> j;
        rc_out = kExitOk;
        return j;
    } catch (const std::exception& e) {
        std::cerr << "error: " << path << ": " << e.what() << "\n";
        rc_out = kExitUsage;
        return {};
    }
}

bool write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (text.empty() || text.back() != '\n') std::cout << '\n';
        return true;
    }
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
    if (!out.good()) {
        std::cerr << "error: cannot write '" << path << "'\n";
        return false;
    }
    return true;
}

// "0.5" -> every coordinate, "0.5,1,2" -> per coordinate.
bool parse_bounds(const std::string& text, Json& out) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) return false;
        } catch (const std::exception&) {
            return false;
        }
    }
    if (values.empty()) return false;
    if (values.size() == 1)
        out = values[0];
    else
        out = values;
    return true;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::string config_path, out_path;
    std::uint64_t k = 5, d = 5, n = 10000, seed = 0;
    double separation = 3.0, within_std = 1.0;
    std::string weights = "uniform";
};

int run_gen(const GenArgs& args, const CLI::App& cmd) {
    Json cfg = Json::object();
    if (!args.config_path.empty()) {
        int rc = kExitOk;
        cfg = load_json_or_die(args.config_path, rc);
        if (rc != kExitOk) return rc;
    }
    if (cmd.count("--k")) cfg["k"] = args.k;
    else if (!cfg.contains("k")) cfg["k"] = args.k;
    if (cmd.count("--d")) cfg["d"] = args.d;
    else if (!cfg.contains("d")) cfg["d"] = args.d;
    if (cmd.count("--n")) cfg["n"] = args.n;
    else if (!cfg.contains("n")) cfg["n"] = args.n;
    if (cmd.count("--separation")) cfg["separation"] = args.separation;
    if (cmd.count("--within-std")) cfg["within_std"] = args.within_std;
    if (cmd.count("--weights")) cfg["weight_mode"] = args.weights;
    if (cmd.count("--seed") || !cfg.contains("seed")) cfg["seed"] = args.seed;

    sl_dataset* data = nullptr;
    StringOut meta;
    const int rc = sl_dataset_generate(cfg.dump().c_str(), &data, nullptr, &meta.ptr);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_dataset, decltype(&sl_dataset_free)> guard(data, sl_dataset_free);

    const int wrc = sl_dataset_write(data, args.out_path.c_str());
    if (wrc != SL_OK) return check(wrc);
    if (!write_text(args.out_path + ".json", meta.str())) return kExitRuntime;

    uint64_t n = 0, d = 0;
    sl_dataset_shape(data, &n, &d);
    std::cout << "wrote " << args.out_path << " (" << n << " x " << d << ") and "
              << args.out_path << ".json\n";
    return kExitOk;
}

// ---------------------------------------------------------------- sketch

struct SketchArgs {
    std::string data_path, out_path, law = "fg", sigma = "auto";
    std::uint64_t m = 0, seed = 0, subsample = 2000;
};

int run_sketch(const SketchArgs& args) {
    sl_dataset* data = nullptr;
    int rc = sl_dataset_read(args.data_path.c_str(), &data);
    if (rc != SL_OK && sl_last_error_code() == SL_ERR_IO) {
        // Fall back to CSV interchange.
        rc = sl_dataset_import_csv(args.data_path.c_str(), &data);
    }
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_dataset, decltype(&sl_dataset_free)> data_guard(
        data, sl_dataset_free);

    double sigma = 0.0;
    if (args.sigma == "auto") {
        rc = sl_scale_heuristic(data, args.subsample, args.seed, &sigma);
        if (rc != SL_OK) return check(rc);
    } else {
        try {
            sigma = std::stod(args.sigma);
        } catch (const std::exception&) {
            std::cerr << "error: --sigma expects a number or 'auto'\n";
            return kExitUsage;
        }
    }

    uint64_t d = 0;
    sl_dataset_shape(data, nullptr, &d);
    sl_frequencies* freqs = nullptr;
    rc = sl_frequencies_draw(args.m, d, args.law.c_str(), sigma, args.seed, &freqs);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_frequencies, decltype(&sl_frequencies_free)> freq_guard(
        freqs, sl_frequencies_free);

    sl_sketch* sketch = nullptr;
    rc = sl_sketch_compute(data, freqs, &sketch);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_sketch, decltype(&sl_sketch_free)> sketch_guard(
        sketch, sl_sketch_free);

    rc = sl_sketch_save(sketch, freqs, args.out_path.c_str());
    if (rc != SL_OK) return check(rc);
    std::cout << "wrote " << args.out_path << " (m=" << args.m
              << ", sigma=" << sigma << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------- decode

struct DecodeArgs {
    std::string sketch_path, out_path, config_path, data_path;
    std::string model = "dirac", decoder = "clompr";
    std::string box_lo, box_hi;
    std::uint64_t k = 0, seed = 0;
};

int run_decode(const DecodeArgs& args, const CLI::App& cmd) {
    Json options = Json::object();
    if (!args.config_path.empty()) {
        int rc = kExitOk;
        options = load_json_or_die(args.config_path, rc);
        if (rc != kExitOk) return rc;
    }
    if (cmd.count("--k") || !options.contains("k")) options["k"] = args.k;
    if (cmd.count("--model") || !options.contains("model")) options["model"] = args.model;
    if (cmd.count("--decoder") || !options.contains("decoder"))
        options["decoder"] = args.decoder;
    if (cmd.count("--seed") || !options.contains("seed")) options["seed"] = args.seed;

    if (!args.box_lo.empty() || !args.box_hi.empty()) {
        Json lo, hi;
        if (!parse_bounds(args.box_lo, lo) || !parse_bounds(args.box_hi, hi)) {
            std::cerr << "error: --box-lo/--box-hi expect a number or a comma list\n";
            return kExitUsage;
        }
        options["box_lo"] = lo;
        options["box_hi"] = hi;
    } else if (!args.data_path.empty()) {
        // Derive the search box from the dataset's per-coordinate range.
        sl_dataset* data = nullptr;
        int rc = sl_dataset_read(args.data_path.c_str(), &data);
        if (rc != SL_OK) return check(rc);
        std::unique_ptr<sl_dataset, decltype(&sl_dataset_free)> guard(
            data, sl_dataset_free);
        uint64_t n = 0, d = 0;
        sl_dataset_shape(data, &n, &d);
        std::vector<double> points(n * d);
        sl_dataset_copy_points(data, points.data(), points.size());
        std::vector<double> lo(d, std::numeric_limits<double>::infinity());
        std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
        for (uint64_t i = 0; i < n; ++i)
            for (uint64_t t = 0; t < d; ++t) {
                lo[t] = std::min(lo[t], points[i * d + t]);
                hi[t] = std::max(hi[t], points[i * d + t]);
            }
        options["box_lo"] = lo;
        options["box_hi"] = hi;
    }
    if (!options.contains("box_lo") || !options.contains("box_hi")) {
        std::cerr << "error: decoding needs a search box: pass --box-lo/--box-hi, "
                     "--data, or box_lo/box_hi in --config\n";
        return kExitUsage;
    }

    sl_sketch* sketch = nullptr;
    sl_frequencies* freqs = nullptr;
    int rc = sl_sketch_load(args.sketch_path.c_str(), &sketch, &freqs);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_sketch, decltype(&sl_sketch_free)> sketch_guard(
        sketch, sl_sketch_free);
    std::unique_ptr<sl_frequencies, decltype(&sl_frequencies_free)> freq_guard(
        freqs, sl_frequencies_free);

    sl_decode_result* result = nullptr;
    rc = sl_decode(sketch, freqs, options.dump().c_str(), &result);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_decode_result, decltype(&sl_decode_result_free)> result_guard(
        result, sl_decode_result_free);

    StringOut json;
    rc = sl_decode_result_to_json(result, &json.ptr);
    if (rc != SL_OK) return check(rc);
    if (!write_text(args.out_path, json.str())) return kExitRuntime;

    double final_cost = 0.0;
    sl_decode_result_cost(result, &final_cost);
    std::cerr << "decode finished, final cost " << final_cost << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string data_path, result_path, truth_path, sketch_path, out_path;
    std::uint64_t lloyd_restarts = 10, seed = 0;
};

int run_eval(const EvalArgs& args) {
    sl_dataset* data = nullptr;
    int rc = sl_dataset_read(args.data_path.c_str(), &data);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_dataset, decltype(&sl_dataset_free)> data_guard(
        data, sl_dataset_free);

    int load_rc = kExitOk;
    const Json result_json = load_json_or_die(args.result_path, load_rc);
    if (load_rc != kExitOk) return load_rc;
    sl_model* decoded = nullptr;
    rc = sl_model_from_json(result_json.dump().c_str(), &decoded);
    if (rc != SL_OK) return check(rc);
    std::unique_ptr<sl_model, decltype(&sl_model_free)> decoded_guard(
        decoded, sl_model_free);

    sl_model* truth = nullptr;
    std::unique_ptr<sl_model, decltype(&sl_model_free)> truth_guard(
        nullptr, sl_model_free);
    if (!args.truth_path.empty()) {
        Json truth_json = load_json_or_die(args.truth_path, load_rc);
        if (load_rc != kExitOk) return load_rc;
        // Accept both a bare model and a generator metadata file.
        if (truth_json.contains("ground_truth")) truth_json = truth_json["ground_truth"];
        rc = sl_model_from_json(truth_json.dump().c_str(), &truth);
        if (rc != SL_OK) return check(rc);
        truth_guard.reset(truth);
    }

    sl_sketch* sketch = nullptr;
    sl_frequencies* freqs = nullptr;
    std::unique_ptr<sl_sketch, decltype(&sl_sketch_free)> sketch_guard(
        nullptr, sl_sketch_free);
    std::unique_ptr<sl_frequencies, decltype(&sl_frequencies_free)> freq_guard(
        nullptr, sl_frequencies_free);
    if (!args.sketch_path.empty()) {
        rc = sl_sketch_load(args.sketch_path.c_str(), &sketch, &freqs);
        if (rc != SL_OK) return check(rc);
        sketch_guard.reset(sketch);
        freq_guard.reset(freqs);
    }

    const Json options = {{"lloyd_restarts", args.lloyd_restarts}, {"seed", args.seed}};
    StringOut report;
    rc = sl_evaluate(data, decoded, truth, sketch, freqs, options.dump().c_str(),
                     &report.ptr);
    if (rc != SL_OK) return check(rc);
    if (!write_text(args.out_path, report.str())) return kExitRuntime;
    return kExitOk;
}

// ---------------------------------------------------------------- experiment

struct ExperimentArgs {
    std::string which, preset = "desk", config_path, out_path, csv_path;
    std::uint64_t seed = 0;
    int workers = 0;
    bool seed_set = false;
};

int run_experiment_cmd(const ExperimentArgs& args, const CLI::App& cmd) {
    Json cfg = Json::object();
    if (!args.config_path.empty()) {
        int rc = kExitOk;
        cfg = load_json_or_die(args.config_path, rc);
        if (rc != kExitOk) return rc;
    }
    if (cmd.count("--preset") || !cfg.contains("preset")) cfg["preset"] = args.preset;
    if (cmd.count("--seed")) cfg["seed"] = args.seed;

    std::string csv = args.csv_path;
    if (csv.empty()) {
        csv = args.out_path;
        const std::size_t dot = csv.rfind('.');
        if (dot != std::string::npos) csv.resize(dot);
        csv += ".csv";
    }

    StringOut summary;
    const int rc = sl_experiment_run(args.which.c_str(), cfg.dump().c_str(),
                                     args.out_path.c_str(), csv.c_str(),
                                     args.workers, &summary.ptr);
    if (rc != SL_OK) return check(rc);
    std::cout << summary.str() << "\n";
    std::cout << "records: " << args.out_path << "\nsummary: " << csv << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- selfcheck

int run_selfcheck_cmd(std::uint64_t seed, bool quick, const std::string& out_path) {
    int ok = 0;
    StringOut report;
    const int rc = sl_selfcheck(seed, quick ? 1 : 0, &ok, &report.ptr);
    if (rc != SL_OK) return check(rc);
    if (!write_text(out_path, report.str())) return kExitRuntime;
    return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sketchlearn: compressive learning from random Fourier sketches"};
    app.require_subcommand(1);

    // gen
    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
    gen_cmd->add_option("--k,--K", gen.k, "cluster count");
    gen_cmd->add_option("--d", gen.d, "dimension");
    gen_cmd->add_option("--n", gen.n, "sample count");
    gen_cmd->add_option("--separation", gen.separation, "center spacing in stds");
    gen_cmd->add_option("--within-std", gen.within_std, "within-cluster std");
    gen_cmd->add_option("--weights", gen.weights, "uniform|dirichlet5");
    gen_cmd->add_option("--seed", gen.seed, "random seed");
    gen_cmd->add_option("--config", gen.config_path, "JSON generator config");
    gen_cmd->add_option("--out", gen.out_path, "output dataset path")->required();

    // sketch
    SketchArgs sketch;
    CLI::App* sketch_cmd = app.add_subcommand("sketch", "sketch a dataset");
    sketch_cmd->add_option("--data", sketch.data_path, "dataset (binary or CSV)")
        ->required();
    sketch_cmd->add_option("--m", sketch.m, "number of frequencies")->required();
    sketch_cmd->add_option("--law", sketch.law, "frequency law: fg|ar");
    sketch_cmd->add_option("--sigma", sketch.sigma, "scale, or 'auto'");
    sketch_cmd->add_option("--subsample", sketch.subsample,
                           "subsample size for the scale heuristic");
    sketch_cmd->add_option("--seed", sketch.seed, "random seed");
    sketch_cmd->add_option("--out", sketch.out_path, "output sketch JSON")->required();

    // decode
    DecodeArgs decode;
    CLI::App* decode_cmd = app.add_subcommand("decode", "decode a mixture from a sketch");
    decode_cmd->add_option("--sketch", decode.sketch_path, "sketch JSON")->required();
    decode_cmd->add_option("--k,--K", decode.k, "component count");
    decode_cmd->add_option("--model", decode.model, "dirac|gaussian");
    decode_cmd->add_option("--decoder", decode.decoder, "clompr|clomprxN|geneticl");
    decode_cmd->add_option("--box-lo", decode.box_lo, "search box lower bounds");
    decode_cmd->add_option("--box-hi", decode.box_hi, "search box upper bounds");
    decode_cmd->add_option("--data", decode.data_path,
                           "dataset whose range provides the search box");
    decode_cmd->add_option("--seed", decode.seed, "random seed");
    decode_cmd->add_option("--config", decode.config_path, "JSON decode options");
    decode_cmd->add_option("--out", decode.out_path, "output result JSON (- for stdout)");

    // eval
    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a decoded model");
    eval_cmd->add_option("--data", eval.data_path, "dataset")->required();
    eval_cmd->add_option("--result", eval.result_path, "decode result JSON")->required();
    eval_cmd->add_option("--truth", eval.truth_path,
                         "ground-truth model JSON or generator metadata");
    eval_cmd->add_option("--sketch", eval.sketch_path, "sketch JSON (for costs)");
    eval_cmd->add_option("--lloyd-restarts", eval.lloyd_restarts, "baseline restarts");
    eval_cmd->add_option("--seed", eval.seed, "baseline seed");
    eval_cmd->add_option("--out", eval.out_path, "output report JSON (- for stdout)");

    // experiment
    ExperimentArgs experiment;
    CLI::App* exp_cmd = app.add_subcommand("experiment", "run a sweep experiment");
    exp_cmd->add_option("which", experiment.which, "fig2|fig3|fig4")->required();
    exp_cmd->add_option("--preset", experiment.preset, "desk|paper");
    exp_cmd->add_option("--config", experiment.config_path, "JSON experiment config");
    exp_cmd->add_option("--seed", experiment.seed, "master seed");
    exp_cmd->add_option("--workers", experiment.workers,
                        "worker threads (overrides CL_WORKERS)");
    exp_cmd->add_option("--out", experiment.out_path, "output JSONL path")->required();
    exp_cmd->add_option("--csv", experiment.csv_path, "summary CSV path");

    // selfcheck
    std::uint64_t selfcheck_seed = 1;
    bool selfcheck_quick = false;
    std::string selfcheck_out;
    CLI::App* selfcheck_cmd =
        app.add_subcommand("selfcheck", "run the library invariant suite");
    selfcheck_cmd->add_option("--seed", selfcheck_seed, "random seed");
    selfcheck_cmd->add_flag("--quick", selfcheck_quick, "reduced repetition counts");
    selfcheck_cmd->add_option("--out", selfcheck_out, "report path (- for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) return run_gen(gen, *gen_cmd);
        if (sketch_cmd->parsed()) return run_sketch(sketch);
        if (decode_cmd->parsed()) return run_decode(decode, *decode_cmd);
        if (eval_cmd->parsed()) return run_eval(eval);
        if (exp_cmd->parsed()) return run_experiment_cmd(experiment, *exp_cmd);
        if (selfcheck_cmd->parsed())
            return run_selfcheck_cmd(selfcheck_seed, selfcheck_quick, selfcheck_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    std::cerr << app.help() << "\n";
    return kExitUsage;
}
