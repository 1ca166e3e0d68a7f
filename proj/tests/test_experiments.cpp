#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/decoders.hpp"
#include "core/experiments.hpp"
#include "core/parallel.hpp"
#include "core/sketch.hpp"
#include "core/tasks.hpp"

using namespace skl;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name)
        : path("sketchlearn_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

// Small-but-real fig2 configuration that runs in a couple of seconds.
Fig2Config mini_fig2() {
    Fig2Config cfg;
    cfg.gen = GeneratorConfig{2, 2, 400, 3.0, 1.0, WeightMode::Uniform, 0};
    cfg.m_over_kd = {1.0, 4.0};
    cfg.draws = 2;
    cfg.trials = 2;
    cfg.lloyd_restarts = 3;
    cfg.max_inner_iterations = 120;
    cfg.final_polish_iterations = 300;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("fig2 mini run emits parseable self-describing records") {
    TempFile jsonl("fig2.jsonl");
    TempFile csv("fig2.csv");
    std::remove(jsonl.path.c_str());

    ExperimentSummary summary = run_fig2(mini_fig2(), jsonl.path, csv.path, 1);
    CHECK(summary.cells_total == 4);
    CHECK(summary.cells_run == 4);
    CHECK(summary.cells_skipped == 0);

    const auto lines = lines_of(slurp(jsonl.path));
    REQUIRE(lines.size() == 4);
    for (const auto& line : lines) {
        const Json rec = Json::parse(line);
        CHECK(rec.at("experiment") == "fig2");
        CHECK(rec.at("cell").contains("key"));
        CHECK(rec.at("cell").contains("freq_seed"));
        CHECK(rec.at("config").contains("gen"));
        CHECK(rec.at("config").at("gen").at("seed").get<std::uint64_t>() != 0);
        CHECK(rec.at("results").contains("metrics"));
    }

    // CSV summary has the documented header and one row per m.
    const auto csv_lines = lines_of(slurp(csv.path));
    REQUIRE(csv_lines.size() == 3);
    CHECK(csv_lines[0] ==
          "m_over_kd,law,decoder,median_rsse,success_rate,failure_count");
    CHECK(csv_lines[1].find("clomprx2") != std::string::npos);
}

TEST_CASE("fig2 reruns are byte-identical and resume skips finished cells") {
    TempFile jsonl_a("fig2_a.jsonl");
    TempFile jsonl_b("fig2_b.jsonl");
    TempFile csv("fig2_ab.csv");
    std::remove(jsonl_a.path.c_str());
    std::remove(jsonl_b.path.c_str());

    const Fig2Config cfg = mini_fig2();
    run_fig2(cfg, jsonl_a.path, csv.path, 1);
    run_fig2(cfg, jsonl_b.path, csv.path, 1);
    const std::string full_a = slurp(jsonl_a.path);
    CHECK(full_a == slurp(jsonl_b.path));

    // Truncate to the first two lines and resume.
    const auto lines = lines_of(full_a);
    {
        std::ofstream out(jsonl_b.path, std::ios::trunc);
        out << lines[0] << '\n' << lines[1] << '\n';
    }
    ExperimentSummary resumed = run_fig2(cfg, jsonl_b.path, csv.path, 1);
    CHECK(resumed.cells_skipped == 2);
    CHECK(resumed.cells_run == 2);
    CHECK(slurp(jsonl_b.path) == full_a);
}

TEST_CASE("fig2 output does not depend on the worker count") {
    TempFile jsonl_1("fig2_w1.jsonl");
    TempFile jsonl_4("fig2_w4.jsonl");
    TempFile csv_1("fig2_w1.csv");
    TempFile csv_4("fig2_w4.csv");
    std::remove(jsonl_1.path.c_str());
    std::remove(jsonl_4.path.c_str());

    const Fig2Config cfg = mini_fig2();
    run_fig2(cfg, jsonl_1.path, csv_1.path, 1);
    run_fig2(cfg, jsonl_4.path, csv_4.path, 4);
    CHECK(slurp(jsonl_1.path) == slurp(jsonl_4.path));
    CHECK(slurp(csv_1.path) == slurp(csv_4.path));
}

TEST_CASE("a damaged trailing line is repaired on resume") {
    TempFile jsonl("fig2_damaged.jsonl");
    TempFile csv("fig2_damaged.csv");
    std::remove(jsonl.path.c_str());

    const Fig2Config cfg = mini_fig2();
    run_fig2(cfg, jsonl.path, csv.path, 1);
    const std::string full = slurp(jsonl.path);
    const auto lines = lines_of(full);

    {
        std::ofstream out(jsonl.path, std::ios::trunc);
        out << lines[0] << '\n' << lines[1] << '\n';
        out << lines[2].substr(0, lines[2].size() / 2);  // killed mid-write
    }
    ExperimentSummary resumed = run_fig2(cfg, jsonl.path, csv.path, 1);
    CHECK(resumed.cells_skipped == 2);
    CHECK(slurp(jsonl.path) == full);
}

TEST_CASE("fig3 mini run keeps the multi-trial decoder at or below clompr") {
    Fig3Config cfg;
    cfg.gen = GeneratorConfig{2, 2, 400, 3.0, 1.0, WeightMode::Uniform, 0};
    cfg.m_over_kd = {1.0, 3.0};
    cfg.seeds = 2;
    cfg.trials = 3;
    cfg.lloyd_restarts = 3;
    cfg.max_inner_iterations = 100;
    cfg.final_polish_iterations = 200;
    cfg.genetic.population = 20;
    cfg.genetic.generations = 30;
    cfg.seed = 5;

    TempFile jsonl("fig3.jsonl");
    TempFile csv("fig3.csv");
    std::remove(jsonl.path.c_str());
    ExperimentSummary summary = run_fig3(cfg, jsonl.path, csv.path, 1);
    CHECK(summary.cells_run == 4);

    for (const auto& line : lines_of(slurp(jsonl.path))) {
        const Json rec = Json::parse(line);
        const Json& res = rec.at("results");
        CHECK(res.at("cost_clomprx").get<double>() <=
              res.at("cost_clompr").get<double>() + 1e-15);
        CHECK(res.at("cost_truth").get<double>() >= 0.0);
    }

    const auto csv_lines = lines_of(slurp(csv.path));
    // Header plus 3 decoders x 2 sweep points.
    REQUIRE(csv_lines.size() == 7);
    CHECK(csv_lines[1].find("clompr") != std::string::npos);
    CHECK(csv_lines[3].find("geneticl") != std::string::npos);
}

TEST_CASE("fig4 mini run reports both tasks per cell") {
    Fig4Config cfg;
    cfg.gen = GeneratorConfig{2, 2, 400, 3.0, 1.0, WeightMode::Uniform, 0};
    cfg.sigma_points = 3;
    cfg.sigma_decades = 2.0;
    cfg.seeds_per_point = 2;
    cfg.trials = 1;
    cfg.lloyd_restarts = 3;
    cfg.max_inner_iterations = 80;
    cfg.final_polish_iterations = 150;
    cfg.seed = 9;

    TempFile jsonl("fig4.jsonl");
    TempFile csv("fig4.csv");
    std::remove(jsonl.path.c_str());
    ExperimentSummary summary = run_fig4(cfg, jsonl.path, csv.path, 1);
    CHECK(summary.cells_total == 2 * 3 * 2);

    for (const auto& line : lines_of(slurp(jsonl.path))) {
        const Json rec = Json::parse(line);
        CHECK(rec.at("results").contains("kmeans"));
        CHECK(rec.at("results").contains("gmm"));
        CHECK(rec.at("config").at("resolved").at("sigma_axis") == "log10");
    }

    const auto csv_lines = lines_of(slurp(csv.path));
    CHECK(csv_lines[0] ==
          "log10_sigma,law,decoder,median_rsse,success_rate,failure_count");
    // Two laws x three sigmas x two task rows.
    CHECK(csv_lines.size() == 1 + 12);
}

TEST_CASE("a record can be re-executed from its own fields alone") {
    TempFile jsonl("fig2_rerun.jsonl");
    TempFile csv("fig2_rerun.csv");
    std::remove(jsonl.path.c_str());
    run_fig2(mini_fig2(), jsonl.path, csv.path, 1);

    const auto lines = lines_of(slurp(jsonl.path));
    const Json rec = Json::parse(lines.back());

    // Rebuild the cell from the record: dataset from the resolved generator
    // config, frequencies and decoder from the per-cell seeds.
    const GeneratorConfig gen = generator_config_from_json(rec.at("config").at("gen"));
    const GeneratedData data = generate_gmm_data(gen);
    const Json& cell = rec.at("cell");
    FrequencyMatrix freqs = draw_frequencies(
        cell.at("m").get<std::size_t>(), gen.d,
        law_from_name(rec.at("config").at("law").get<std::string>()),
        rec.at("config").at("resolved").at("sigma").get<double>(),
        cell.at("freq_seed").get<std::uint64_t>());
    Sketch z = empirical_sketch(data.data, freqs);

    DecodeOptions opts;
    opts.k = gen.k;
    opts.kind = ModelKind::Dirac;
    opts.center_box = DecodeOptions::data_box(data.data);
    opts.trials = rec.at("config").at("trials").get<std::size_t>();
    opts.max_inner_iterations =
        rec.at("config").at("max_inner_iterations").get<std::size_t>();
    opts.final_polish_iterations =
        rec.at("config").at("final_polish_iterations").get<std::size_t>();
    opts.seed = cell.at("decode_seed").get<std::uint64_t>();
    DecodeResult res = clompr_multi(z, freqs, opts);

    const double lloyd_sse =
        rec.at("config").at("resolved").at("lloyd_sse").get<double>();
    const double rsse = relative_sse(data.data, res.model.centers, gen.k, lloyd_sse);
    CHECK(rsse == rec.at("results").at("metrics").at("rsse").get<double>());
    CHECK(res.final_cost == rec.at("results").at("final_cost").get<double>());
}

TEST_CASE("experiment dispatch validates its inputs") {
    TempFile jsonl("dispatch.jsonl");
    CHECK_THROWS_AS(run_experiment("fig9", Json::object(), jsonl.path, "", 1), Error);

    Json bad = Json{{"preset", "desk"}, {"no_such_knob", 1}};
    CHECK_THROWS_AS(run_experiment("fig2", bad, jsonl.path, "", 1), Error);

    Json bad_preset = Json{{"preset", "galactic"}};
    CHECK_THROWS_AS(run_experiment("fig2", bad_preset, jsonl.path, "", 1), Error);
}

TEST_CASE("worker count resolution: flag beats CL_WORKERS beats hardware") {
    setenv("CL_WORKERS", "3", 1);
    CHECK(resolve_workers(0) == 3);
    CHECK(resolve_workers(5) == 5);
    unsetenv("CL_WORKERS");
    CHECK(resolve_workers(0) >= 1);
}

TEST_CASE("paper presets carry the reported scales") {
    const Fig2Config fig2 = Fig2Config::preset("paper");
    CHECK(fig2.gen.k == 10);
    CHECK(fig2.gen.d == 10);
    CHECK(fig2.gen.n == 50000);
    CHECK(fig2.draws == 50);
    CHECK(fig2.trials == 10);

    const Fig3Config fig3 = Fig3Config::preset("paper");
    CHECK(fig3.gen.k == 10);
    CHECK(fig3.gen.d == 5);
    CHECK(fig3.gen.n == 100000);

    const Fig4Config fig4 = Fig4Config::preset("paper");
    CHECK(fig4.gen.k == 6);
    CHECK(fig4.gen.d == 5);
    CHECK(fig4.gen.n == 100000);
    CHECK(fig4.m_over_kd == 20.0);
    CHECK(fig4.trials == 3);
}
