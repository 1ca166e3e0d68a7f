#pragma once

#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/decoders.hpp"
#include "core/serialize.hpp"

namespace skl {

// Desk presets are sized to finish on a workstation; paper presets match the
// reported experimental scales and are not meant for CI.

struct Fig2Config {
    // Clusters are kept well separated relative to their width so the Dirac
    // decoding task is actually solvable at high m; the sketch scale is set
    // from prior knowledge of the generator (about 3x the within-cluster
    // std). Pass sigma <= 0 to use the data-driven heuristic instead.
    GeneratorConfig gen{5, 5, 10000, 6.0, 1.0, WeightMode::Uniform, 0};
    std::vector<double> m_over_kd{0.5, 1.0, 2.0, 5.0, 10.0};
    std::size_t draws = 10;
    FreqLaw law = FreqLaw::FoldedGaussian;
    double sigma = 3.0;
    std::size_t trials = 10;
    std::size_t lloyd_restarts = 10;
    std::size_t max_inner_iterations = 300;
    std::size_t final_polish_iterations = 3000;
    std::uint64_t seed = 1;

    static Fig2Config preset(const std::string& name);  // "desk" | "paper"
    Json to_json() const;
    static Fig2Config from_json(const Json& j, const std::string& preset_name);
};

struct Fig3Config {
    GeneratorConfig gen{5, 3, 10000, 6.0, 1.0, WeightMode::Uniform, 0};
    std::vector<double> m_over_kd{0.5, 1.0, 2.0, 4.0};
    std::size_t seeds = 20;
    FreqLaw law = FreqLaw::FoldedGaussian;
    double sigma = 3.0;
    std::size_t trials = 10;  // the multi-trial decoder column
    GeneticOptions genetic{};
    std::size_t lloyd_restarts = 10;
    std::size_t max_inner_iterations = 300;
    std::size_t final_polish_iterations = 3000;
    std::uint64_t seed = 1;

    static Fig3Config preset(const std::string& name);
    Json to_json() const;
    static Fig3Config from_json(const Json& j, const std::string& preset_name);
};

struct Fig4Config {
    GeneratorConfig gen{4, 3, 10000, 3.0, 1.0, WeightMode::Uniform, 0};
    double m_over_kd = 20.0;
    std::size_t sigma_points = 15;
    double sigma_decades = 3.0;  // grid spans +-decades around the heuristic
    std::size_t seeds_per_point = 20;
    std::vector<FreqLaw> laws{FreqLaw::FoldedGaussian, FreqLaw::AdaptedRadius};
    std::size_t trials = 3;
    std::size_t lloyd_restarts = 10;
    std::size_t max_inner_iterations = 300;
    std::size_t final_polish_iterations = 3000;
    std::uint64_t seed = 1;

    static Fig4Config preset(const std::string& name);
    Json to_json() const;
    static Fig4Config from_json(const Json& j, const std::string& preset_name);
};

struct ExperimentSummary {
    std::size_t cells_total = 0;
    std::size_t cells_run = 0;
    std::size_t cells_skipped = 0;  // already present in the output file
    Json csv_rows = Json::array();
};

// Each runner appends one JSON line per cell to jsonl_path (resuming a partial
// file by skipping cells whose keys are already present), then rewrites the
// CSV summary at csv_path (skipped when empty). Cell computations derive
// their random streams from (config seed, cell key), so output content is
// independent of the worker count; lines are released in canonical cell order
// so complete runs are byte-identical for identical configs.
ExperimentSummary run_fig2(const Fig2Config& cfg, const std::string& jsonl_path,
                           const std::string& csv_path, unsigned workers);
ExperimentSummary run_fig3(const Fig3Config& cfg, const std::string& jsonl_path,
                           const std::string& csv_path, unsigned workers);
ExperimentSummary run_fig4(const Fig4Config& cfg, const std::string& jsonl_path,
                           const std::string& csv_path, unsigned workers);

// Dispatch on "fig2" | "fig3" | "fig4" with a JSON config (merged over the
// named preset, default "desk").
ExperimentSummary run_experiment(const std::string& experiment_id, const Json& config,
                                 const std::string& jsonl_path,
                                 const std::string& csv_path, unsigned workers);

}  // namespace skl
