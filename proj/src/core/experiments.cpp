#include "core/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include "core/parallel.hpp"
#include "core/rng.hpp"
#include "core/sketch.hpp"
#include "core/tasks.hpp"

namespace skl {

namespace {

// Stream salts for deriving per-purpose random keys from the master seed.
constexpr std::uint64_t kSaltDataset = 0xDA7A;
constexpr std::uint64_t kSaltLloyd = 0x110D;
constexpr std::uint64_t kSaltSigma = 0x51A0;
constexpr std::uint64_t kSaltFrequencies = 0x0F20;
constexpr std::uint64_t kSaltDecode = 0xDC0D;
constexpr std::uint64_t kSaltSigmaRef = 0x516F;

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void check_keys(const Json& j, const std::set<std::string>& allowed,
                const std::string& what) {
    require(j.is_object(), ErrorCode::parse_error, what + ": expected a JSON object");
    for (const auto& item : j.items())
        require(allowed.count(item.key()) > 0, ErrorCode::parse_error,
                what + ": unknown key \"" + item.key() + "\"");
}

// Append-only JSONL writer releasing lines in canonical submission order, so
// concurrent sweeps produce byte-identical files.
class OrderedAppender {
public:
    explicit OrderedAppender(const std::string& path)
        : out_(path, std::ios::app) {
        require(out_.good(), ErrorCode::io_error,
                "cannot open '" + path + "' for appending");
    }

    void submit(std::size_t index, std::string line) {
        std::lock_guard<std::mutex> lock(mutex_);
        pending_.emplace(index, std::move(line));
        while (!pending_.empty() && pending_.begin()->first == next_) {
            out_ << pending_.begin()->second << '\n';
            out_.flush();
            pending_.erase(pending_.begin());
            ++next_;
        }
    }

private:
    std::ofstream out_;
    std::mutex mutex_;
    std::map<std::size_t, std::string> pending_;
    std::size_t next_ = 0;
};

// Load an existing JSONL output. A truncated trailing line (killed run) is
// removed so the file stays a valid canonical-order prefix.
std::vector<Json> load_resume_records(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) return {};
    std::vector<Json> records;
    std::vector<std::string> good_lines;
    std::string line;
    bool damaged = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            records.push_back(Json::parse(line));
            good_lines.push_back(line);
        } catch (const std::exception&) {
            damaged = true;
            break;
        }
    }
    in.close();
    if (damaged) {
        std::ofstream out(path, std::ios::trunc);
        for (const auto& l : good_lines) out << l << '\n';
    }
    return records;
}

struct CellJob {
    Json meta;  // must contain "key"
    std::function<Json()> compute;
};

ExperimentSummary run_cells(const std::string& experiment_id,
                            const Json& config_snapshot, std::vector<CellJob> jobs,
                            const std::string& jsonl_path, unsigned workers) {
    ExperimentSummary summary;
    summary.cells_total = jobs.size();

    std::vector<Json> records = load_resume_records(jsonl_path);
    std::set<std::string> done;
    for (const auto& rec : records)
        if (rec.contains("cell") && rec["cell"].contains("key"))
            done.insert(rec["cell"]["key"].get<std::string>());

    std::vector<std::size_t> to_run;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        if (done.count(jobs[i].meta.at("key").get<std::string>()) == 0)
            to_run.push_back(i);
    summary.cells_skipped = jobs.size() - to_run.size();
    summary.cells_run = to_run.size();

    std::vector<Json> new_records(to_run.size());
    {
        OrderedAppender appender(jsonl_path);
        parallel_for(to_run.size(), workers, [&](std::size_t slot) {
            const CellJob& job = jobs[to_run[slot]];
            Json results;
            try {
                results = job.compute();
            } catch (const Error& e) {
                results = Json{{"error", e.what()}};
            }
            Json record;
            record["experiment"] = experiment_id;
            record["cell"] = job.meta;
            record["config"] = config_snapshot;
            record["results"] = std::move(results);
            appender.submit(slot, record.dump());
            new_records[slot] = std::move(record);
        });
    }
    records.insert(records.end(), std::make_move_iterator(new_records.begin()),
                   std::make_move_iterator(new_records.end()));

    // Reorder to canonical cell order for summarization.
    std::map<std::string, const Json*> by_key;
    for (const auto& rec : records)
        by_key[rec.at("cell").at("key").get<std::string>()] = &rec;
    Json ordered = Json::array();
    for (const auto& job : jobs) {
        auto it = by_key.find(job.meta.at("key").get<std::string>());
        if (it != by_key.end()) ordered.push_back(*it->second);
    }
    summary.csv_rows = std::move(ordered);  // runners replace with CSV rows
    return summary;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Json& rows) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::io_error, "cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        bool first = true;
        for (const auto& cell : row) {
            if (!first) out << ',';
            first = false;
            if (cell.is_string())
                out << cell.get<std::string>();
            else if (!cell.is_null())
                out << cell.dump();
        }
        out << '\n';
    }
    require(out.good(), ErrorCode::io_error, "write to '" + path + "' failed");
}

MixtureModel dirac_truth(const MixtureModel& generating) {
    MixtureModel truth = MixtureModel::dirac(generating.k, generating.d);
    truth.centers = generating.centers;
    truth.weights.assign(generating.k, 1.0 / static_cast<double>(generating.k));
    return truth;
}

std::size_t m_from_ratio(double ratio, std::size_t k, std::size_t d) {
    const double m = ratio * static_cast<double>(k) * static_cast<double>(d);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(m)));
}

Json genetic_to_json(const GeneticOptions& g) {
    return Json{{"population", g.population}, {"generations", g.generations},
                {"gamma", g.gamma},           {"mutation_scale", g.mutation_scale},
                {"crossover_rate", g.crossover_rate}, {"elitism", g.elitism},
                {"seed", g.seed}};
}

GeneticOptions genetic_from_json(const Json& j, GeneticOptions base) {
    check_keys(j, {"population", "generations", "gamma", "mutation_scale",
                   "crossover_rate", "elitism", "seed"}, "genetic config");
    if (j.contains("population")) base.population = j.at("population").get<std::size_t>();
    if (j.contains("generations")) base.generations = j.at("generations").get<std::size_t>();
    if (j.contains("gamma")) base.gamma = j.at("gamma").get<double>();
    if (j.contains("mutation_scale")) base.mutation_scale = j.at("mutation_scale").get<double>();
    if (j.contains("crossover_rate")) base.crossover_rate = j.at("crossover_rate").get<double>();
    if (j.contains("elitism")) base.elitism = j.at("elitism").get<std::size_t>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    base.validate();
    return base;
}

GeneratorConfig gen_from_json(const Json& j, GeneratorConfig base) {
    check_keys(j, {"k", "d", "n", "separation", "within_std", "weight_mode", "seed"},
               "generator config");
    if (j.contains("k")) base.k = j.at("k").get<std::size_t>();
    if (j.contains("d")) base.d = j.at("d").get<std::size_t>();
    if (j.contains("n")) base.n = j.at("n").get<std::size_t>();
    if (j.contains("separation")) base.separation = j.at("separation").get<double>();
    if (j.contains("within_std")) base.within_std = j.at("within_std").get<double>();
    if (j.contains("weight_mode"))
        base.weight_mode = weight_mode_from_name(j.at("weight_mode").get<std::string>());
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    base.validate();
    return base;
}

}  // namespace

// ---------------------------------------------------------------------------
// fig2: sketch-size sweep, fresh frequency draws per cell.

Fig2Config Fig2Config::preset(const std::string& name) {
    Fig2Config cfg;
    if (name == "desk") return cfg;
    if (name == "paper") {
        cfg.gen = GeneratorConfig{10, 10, 50000, 6.0, 1.0, WeightMode::Uniform, 0};
        cfg.m_over_kd = {0.5, 1.0, 2.0, 5.0, 10.0, 30.0};
        cfg.draws = 50;
        return cfg;
    }
    raise(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
}

Json Fig2Config::to_json() const {
    Json j;
    j["gen"] = generator_config_to_json(gen);
    j["m_over_kd"] = m_over_kd;
    j["draws"] = draws;
    j["law"] = law_name(law);
    j["sigma"] = sigma;
    j["trials"] = trials;
    j["lloyd_restarts"] = lloyd_restarts;
    j["max_inner_iterations"] = max_inner_iterations;
    j["final_polish_iterations"] = final_polish_iterations;
    j["seed"] = seed;
    return j;
}

Fig2Config Fig2Config::from_json(const Json& j, const std::string& preset_name) {
    Fig2Config cfg = preset(preset_name);
    check_keys(j, {"gen", "m_over_kd", "draws", "law", "sigma", "trials",
                   "lloyd_restarts", "max_inner_iterations",
                   "final_polish_iterations", "seed"}, "fig2 config");
    if (j.contains("gen")) cfg.gen = gen_from_json(j.at("gen"), cfg.gen);
    if (j.contains("m_over_kd")) cfg.m_over_kd = j.at("m_over_kd").get<std::vector<double>>();
    if (j.contains("draws")) cfg.draws = j.at("draws").get<std::size_t>();
    if (j.contains("law")) cfg.law = law_from_name(j.at("law").get<std::string>());
    if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
    if (j.contains("lloyd_restarts")) cfg.lloyd_restarts = j.at("lloyd_restarts").get<std::size_t>();
    if (j.contains("max_inner_iterations"))
        cfg.max_inner_iterations = j.at("max_inner_iterations").get<std::size_t>();
    if (j.contains("final_polish_iterations"))
        cfg.final_polish_iterations = j.at("final_polish_iterations").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    require(!cfg.m_over_kd.empty(), ErrorCode::invalid_argument,
            "fig2 needs a nonempty m grid");
    require(cfg.draws >= 1, ErrorCode::invalid_argument, "fig2 needs draws >= 1");
    return cfg;
}

ExperimentSummary run_fig2(const Fig2Config& cfg, const std::string& jsonl_path,
                           const std::string& csv_path, unsigned workers) {
    const Rng master(cfg.seed);

    GeneratorConfig gen = cfg.gen;
    if (gen.seed == 0) gen.seed = master.derive(kSaltDataset).key();
    auto data = std::make_shared<GeneratedData>(generate_gmm_data(gen));
    auto lloyd = std::make_shared<KMeansResult>(lloyd_kmeans(
        data->data, gen.k, cfg.lloyd_restarts, master.derive(kSaltLloyd).key()));
    const double sigma =
        cfg.sigma > 0.0
            ? cfg.sigma
            : scale_heuristic(data->data, 2000, master.derive(kSaltSigma).key());
    auto truth = std::make_shared<MixtureModel>(dirac_truth(data->ground_truth));
    auto box = std::make_shared<Box>(DecodeOptions::data_box(data->data));

    Json snapshot = cfg.to_json();
    snapshot["gen"]["seed"] = gen.seed;
    snapshot["resolved"] = Json{{"sigma", sigma},
                                {"lloyd_sse", lloyd->sse},
                                {"separation_warning", data->separation_warning}};

    std::vector<CellJob> jobs;
    for (std::size_t mi = 0; mi < cfg.m_over_kd.size(); ++mi) {
        const std::size_t m = m_from_ratio(cfg.m_over_kd[mi], gen.k, gen.d);
        for (std::size_t draw = 0; draw < cfg.draws; ++draw) {
            const std::uint64_t freq_seed =
                master.derive(kSaltFrequencies).derive(mi).derive(draw).key();
            const std::uint64_t decode_seed =
                master.derive(kSaltDecode).derive(mi).derive(draw).key();
            CellJob job;
            job.meta = Json{{"key", "m=" + std::to_string(m) + ";draw=" + std::to_string(draw)},
                            {"m", m},
                            {"m_over_kd", cfg.m_over_kd[mi]},
                            {"draw", draw},
                            {"freq_seed", freq_seed},
                            {"decode_seed", decode_seed}};
            job.compute = [=, &cfg]() -> Json {
                FrequencyMatrix freqs =
                    draw_frequencies(m, gen.d, cfg.law, sigma, freq_seed);
                Sketch z = empirical_sketch(data->data, freqs);

                DecodeOptions opts;
                opts.k = gen.k;
                opts.kind = ModelKind::Dirac;
                opts.center_box = *box;
                opts.trials = cfg.trials;
                opts.max_inner_iterations = cfg.max_inner_iterations;
                opts.final_polish_iterations = cfg.final_polish_iterations;
                opts.seed = decode_seed;
                DecodeResult res = clompr_multi(z, freqs, opts);

                const double rsse = relative_sse(data->data, res.model.centers,
                                                 gen.k, lloyd->sse);
                EvaluationReport report = make_report_kmeans(rsse);
                attach_costs(report, res.final_cost, cost(*truth, z, freqs));
                Json out;
                out["metrics"] = report_to_json(report);
                out["final_cost"] = res.final_cost;
                out["cost_truth"] = report.cost_ground_truth;
                return out;
            };
            jobs.push_back(std::move(job));
        }
    }

    ExperimentSummary summary =
        run_cells("fig2", snapshot, std::move(jobs), jsonl_path, workers);

    // Summaries: one row per m.
    Json rows = Json::array();
    const Json ordered = std::move(summary.csv_rows);
    for (std::size_t mi = 0; mi < cfg.m_over_kd.size(); ++mi) {
        std::vector<double> rsse;
        std::size_t failures = 0, successes = 0, valid = 0;
        for (const auto& rec : ordered) {
            if (rec.at("cell").at("m_over_kd").get<double>() != cfg.m_over_kd[mi])
                continue;
            if (rec.at("results").contains("error")) continue;
            const Json& metrics = rec.at("results").at("metrics");
            rsse.push_back(metrics.at("rsse").get<double>());
            ++valid;
            if (metrics.at("kmeans_success").get<bool>()) ++successes;
            if (metrics.at("failure_detected").get<bool>()) ++failures;
        }
        if (valid == 0) continue;
        rows.push_back(Json::array(
            {cfg.m_over_kd[mi], law_name(cfg.law),
             "clomprx" + std::to_string(cfg.trials), median(rsse),
             static_cast<double>(successes) / static_cast<double>(valid),
             failures}));
    }
    write_csv(csv_path,
              {"m_over_kd", "law", "decoder", "median_rsse", "success_rate",
               "failure_count"},
              rows);
    summary.csv_rows = std::move(rows);
    return summary;
}

// ---------------------------------------------------------------------------
// fig3: fixed master frequency draw, nested prefixes, decoder comparison.

Fig3Config Fig3Config::preset(const std::string& name) {
    Fig3Config cfg;
    if (name == "desk") return cfg;
    if (name == "paper") {
        cfg.gen = GeneratorConfig{10, 5, 100000, 6.0, 1.0, WeightMode::Uniform, 0};
        cfg.m_over_kd = {0.5, 1.0, 2.0, 4.0, 8.0};
        cfg.seeds = 20;
        return cfg;
    }
    raise(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
}

Json Fig3Config::to_json() const {
    Json j;
    j["gen"] = generator_config_to_json(gen);
    j["m_over_kd"] = m_over_kd;
    j["seeds"] = seeds;
    j["law"] = law_name(law);
    j["sigma"] = sigma;
    j["trials"] = trials;
    j["genetic"] = genetic_to_json(genetic);
    j["lloyd_restarts"] = lloyd_restarts;
    j["max_inner_iterations"] = max_inner_iterations;
    j["final_polish_iterations"] = final_polish_iterations;
    j["seed"] = seed;
    return j;
}

Fig3Config Fig3Config::from_json(const Json& j, const std::string& preset_name) {
    Fig3Config cfg = preset(preset_name);
    check_keys(j, {"gen", "m_over_kd", "seeds", "law", "sigma", "trials", "genetic",
                   "lloyd_restarts", "max_inner_iterations",
                   "final_polish_iterations", "seed"}, "fig3 config");
    if (j.contains("gen")) cfg.gen = gen_from_json(j.at("gen"), cfg.gen);
    if (j.contains("m_over_kd")) cfg.m_over_kd = j.at("m_over_kd").get<std::vector<double>>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::size_t>();
    if (j.contains("law")) cfg.law = law_from_name(j.at("law").get<std::string>());
    if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
    if (j.contains("genetic")) cfg.genetic = genetic_from_json(j.at("genetic"), cfg.genetic);
    if (j.contains("lloyd_restarts")) cfg.lloyd_restarts = j.at("lloyd_restarts").get<std::size_t>();
    if (j.contains("max_inner_iterations"))
        cfg.max_inner_iterations = j.at("max_inner_iterations").get<std::size_t>();
    if (j.contains("final_polish_iterations"))
        cfg.final_polish_iterations = j.at("final_polish_iterations").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    require(!cfg.m_over_kd.empty(), ErrorCode::invalid_argument,
            "fig3 needs a nonempty m grid");
    require(cfg.seeds >= 1, ErrorCode::invalid_argument, "fig3 needs seeds >= 1");
    return cfg;
}

ExperimentSummary run_fig3(const Fig3Config& cfg, const std::string& jsonl_path,
                           const std::string& csv_path, unsigned workers) {
    const Rng master(cfg.seed);

    GeneratorConfig gen = cfg.gen;
    if (gen.seed == 0) gen.seed = master.derive(kSaltDataset).key();
    auto data = std::make_shared<GeneratedData>(generate_gmm_data(gen));
    auto lloyd = std::make_shared<KMeansResult>(lloyd_kmeans(
        data->data, gen.k, cfg.lloyd_restarts, master.derive(kSaltLloyd).key()));
    const double sigma =
        cfg.sigma > 0.0
            ? cfg.sigma
            : scale_heuristic(data->data, 2000, master.derive(kSaltSigma).key());
    auto truth = std::make_shared<MixtureModel>(dirac_truth(data->ground_truth));
    auto box = std::make_shared<Box>(DecodeOptions::data_box(data->data));

    std::vector<std::size_t> m_values;
    std::size_t m_max = 1;
    for (double ratio : cfg.m_over_kd) {
        m_values.push_back(m_from_ratio(ratio, gen.k, gen.d));
        m_max = std::max(m_max, m_values.back());
    }
    const std::uint64_t master_freq_seed = master.derive(kSaltFrequencies).key();
    FrequencyMatrix master_freqs =
        draw_frequencies(m_max, gen.d, cfg.law, sigma, master_freq_seed);
    Sketch master_sketch = empirical_sketch(data->data, master_freqs);

    // Per-m prefixes share the master draw, so the cost functions are nested.
    struct PrefixData {
        FrequencyMatrix freqs;
        Sketch sketch;
        double cost_truth;
    };
    std::vector<std::shared_ptr<PrefixData>> prefixes;
    for (std::size_t m : m_values) {
        auto p = std::make_shared<PrefixData>();
        p->freqs = frequency_prefix(master_freqs, m);
        p->sketch.values.assign(master_sketch.values.begin(),
                                master_sketch.values.begin() +
                                    static_cast<std::ptrdiff_t>(2 * m));
        p->sketch.n = master_sketch.n;
        p->sketch.fingerprint = p->freqs.fingerprint();
        p->cost_truth = cost(*truth, p->sketch, p->freqs);
        prefixes.push_back(std::move(p));
    }

    Json snapshot = cfg.to_json();
    snapshot["gen"]["seed"] = gen.seed;
    snapshot["resolved"] = Json{{"sigma", sigma},
                                {"lloyd_sse", lloyd->sse},
                                {"master_freq_seed", master_freq_seed},
                                {"m_values", m_values},
                                {"separation_warning", data->separation_warning}};

    std::vector<CellJob> jobs;
    for (std::size_t mi = 0; mi < m_values.size(); ++mi) {
        for (std::size_t s = 0; s < cfg.seeds; ++s) {
            const std::uint64_t decode_seed =
                master.derive(kSaltDecode).derive(mi).derive(s).key();
            auto prefix = prefixes[mi];
            CellJob job;
            job.meta = Json{{"key", "m=" + std::to_string(m_values[mi]) + ";seed=" +
                                        std::to_string(s)},
                            {"m", m_values[mi]},
                            {"m_over_kd", cfg.m_over_kd[mi]},
                            {"seed_index", s},
                            {"decode_seed", decode_seed}};
            job.compute = [=, &cfg]() -> Json {
                DecodeOptions opts;
                opts.k = gen.k;
                opts.kind = ModelKind::Dirac;
                opts.center_box = *box;
                opts.max_inner_iterations = cfg.max_inner_iterations;
                opts.final_polish_iterations = cfg.final_polish_iterations;
                opts.seed = decode_seed;

                opts.trials = 1;
                DecodeResult single = clompr_multi(prefix->sketch, prefix->freqs, opts);
                opts.trials = cfg.trials;
                DecodeResult multi = clompr_multi(prefix->sketch, prefix->freqs, opts);
                opts.trials = 1;
                DecodeResult genetic =
                    geneticl(prefix->sketch, prefix->freqs, opts, cfg.genetic);

                auto rsse_of = [&](const DecodeResult& r) {
                    return relative_sse(data->data, r.model.centers, gen.k, lloyd->sse);
                };
                Json out;
                out["cost_clompr"] = single.final_cost;
                out["cost_clomprx"] = multi.final_cost;
                out["cost_geneticl"] = genetic.final_cost;
                out["cost_truth"] = prefix->cost_truth;
                out["rsse_clompr"] = rsse_of(single);
                out["rsse_clomprx"] = rsse_of(multi);
                out["rsse_geneticl"] = rsse_of(genetic);
                return out;
            };
            jobs.push_back(std::move(job));
        }
    }

    ExperimentSummary summary =
        run_cells("fig3", snapshot, std::move(jobs), jsonl_path, workers);

    const std::string multi_name = "clomprx" + std::to_string(cfg.trials);
    struct DecoderCols {
        const char* cost_field;
        const char* rsse_field;
        std::string name;
    };
    const std::vector<DecoderCols> decoders = {
        {"cost_clompr", "rsse_clompr", "clompr"},
        {"cost_clomprx", "rsse_clomprx", multi_name},
        {"cost_geneticl", "rsse_geneticl", "geneticl"}};

    Json rows = Json::array();
    const Json ordered = std::move(summary.csv_rows);
    for (std::size_t mi = 0; mi < cfg.m_over_kd.size(); ++mi) {
        for (const auto& dec : decoders) {
            std::vector<double> rsse;
            std::size_t failures = 0, successes = 0, valid = 0;
            for (const auto& rec : ordered) {
                if (rec.at("cell").at("m_over_kd").get<double>() != cfg.m_over_kd[mi])
                    continue;
                if (rec.at("results").contains("error")) continue;
                const Json& res = rec.at("results");
                const double r = res.at(dec.rsse_field).get<double>();
                rsse.push_back(r);
                ++valid;
                if (r <= kSuccessThreshold) ++successes;
                if (res.at(dec.cost_field).get<double>() >
                    res.at("cost_truth").get<double>())
                    ++failures;
            }
            if (valid == 0) continue;
            rows.push_back(Json::array(
                {cfg.m_over_kd[mi], law_name(cfg.law), dec.name, median(rsse),
                 static_cast<double>(successes) / static_cast<double>(valid),
                 failures}));
        }
    }
    write_csv(csv_path,
              {"m_over_kd", "law", "decoder", "median_rsse", "success_rate",
               "failure_count"},
              rows);
    summary.csv_rows = std::move(rows);
    return summary;
}

// ---------------------------------------------------------------------------
// fig4: scale sweep over both frequency laws, k-means and GMM from one sketch.

Fig4Config Fig4Config::preset(const std::string& name) {
    Fig4Config cfg;
    if (name == "desk") return cfg;
    if (name == "paper") {
        cfg.gen = GeneratorConfig{6, 5, 100000, 3.0, 1.0, WeightMode::Uniform, 0};
        cfg.seeds_per_point = 50;
        return cfg;
    }
    raise(ErrorCode::invalid_argument, "unknown preset '" + name + "'");
}

Json Fig4Config::to_json() const {
    Json j;
    j["gen"] = generator_config_to_json(gen);
    j["m_over_kd"] = m_over_kd;
    j["sigma_points"] = sigma_points;
    j["sigma_decades"] = sigma_decades;
    j["seeds_per_point"] = seeds_per_point;
    Json laws_json = Json::array();
    for (FreqLaw law : laws) laws_json.push_back(law_name(law));
    j["laws"] = std::move(laws_json);
    j["trials"] = trials;
    j["lloyd_restarts"] = lloyd_restarts;
    j["max_inner_iterations"] = max_inner_iterations;
    j["final_polish_iterations"] = final_polish_iterations;
    j["seed"] = seed;
    return j;
}

Fig4Config Fig4Config::from_json(const Json& j, const std::string& preset_name) {
    Fig4Config cfg = preset(preset_name);
    check_keys(j, {"gen", "m_over_kd", "sigma_points", "sigma_decades",
                   "seeds_per_point", "laws", "trials", "lloyd_restarts",
                   "max_inner_iterations", "final_polish_iterations", "seed"},
               "fig4 config");
    if (j.contains("gen")) cfg.gen = gen_from_json(j.at("gen"), cfg.gen);
    if (j.contains("m_over_kd")) cfg.m_over_kd = j.at("m_over_kd").get<double>();
    if (j.contains("sigma_points")) cfg.sigma_points = j.at("sigma_points").get<std::size_t>();
    if (j.contains("sigma_decades")) cfg.sigma_decades = j.at("sigma_decades").get<double>();
    if (j.contains("seeds_per_point"))
        cfg.seeds_per_point = j.at("seeds_per_point").get<std::size_t>();
    if (j.contains("laws")) {
        cfg.laws.clear();
        for (const auto& name : j.at("laws"))
            cfg.laws.push_back(law_from_name(name.get<std::string>()));
    }
    if (j.contains("trials")) cfg.trials = j.at("trials").get<std::size_t>();
    if (j.contains("lloyd_restarts")) cfg.lloyd_restarts = j.at("lloyd_restarts").get<std::size_t>();
    if (j.contains("max_inner_iterations"))
        cfg.max_inner_iterations = j.at("max_inner_iterations").get<std::size_t>();
    if (j.contains("final_polish_iterations"))
        cfg.final_polish_iterations = j.at("final_polish_iterations").get<std::size_t>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    require(cfg.sigma_points >= 2, ErrorCode::invalid_argument,
            "fig4 needs at least 2 sigma points");
    require(!cfg.laws.empty(), ErrorCode::invalid_argument,
            "fig4 needs at least one frequency law");
    require(cfg.seeds_per_point >= 1, ErrorCode::invalid_argument,
            "fig4 needs seeds_per_point >= 1");
    return cfg;
}

namespace {

// Per-repetition fixtures for fig4, shared across every (law, sigma) cell.
struct Fig4Rep {
    GeneratedData data;
    KMeansResult lloyd;
    MixtureModel truth_dirac;
    Box box;
    double loglik_truth = 0.0;
};

class Fig4RepCache {
public:
    Fig4RepCache(const Fig4Config& cfg, Rng master) : cfg_(cfg), master_(master) {
        reps_.resize(cfg.seeds_per_point);
    }

    std::shared_ptr<const Fig4Rep> get(std::size_t rep) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!reps_[rep]) {
            auto r = std::make_shared<Fig4Rep>();
            GeneratorConfig gen = cfg_.gen;
            gen.seed = gen.seed != 0
                           ? Rng(gen.seed).derive(rep).key()
                           : master_.derive(kSaltDataset).derive(rep).key();
            r->data = generate_gmm_data(gen);
            r->lloyd = lloyd_kmeans(r->data.data, gen.k, cfg_.lloyd_restarts,
                                    master_.derive(kSaltLloyd).derive(rep).key());
            r->truth_dirac = dirac_truth(r->data.ground_truth);
            r->box = DecodeOptions::data_box(r->data.data);
            r->loglik_truth = gmm_loglik(r->data.data, r->data.ground_truth);
            reps_[rep] = std::move(r);
        }
        return reps_[rep];
    }

private:
    Fig4Config cfg_;
    Rng master_;
    std::mutex mutex_;
    std::vector<std::shared_ptr<Fig4Rep>> reps_;
};

}  // namespace

ExperimentSummary run_fig4(const Fig4Config& cfg, const std::string& jsonl_path,
                           const std::string& csv_path, unsigned workers) {
    const Rng master(cfg.seed);

    // The sigma grid is centered on the heuristic scale of a reference
    // dataset and swept in log10 units.
    GeneratorConfig ref_gen = cfg.gen;
    if (ref_gen.seed == 0) ref_gen.seed = master.derive(kSaltSigmaRef).key();
    GeneratedData ref = generate_gmm_data(ref_gen);
    const double sigma_hat =
        scale_heuristic(ref.data, 2000, master.derive(kSaltSigma).key());
    const double center_log10 = std::log10(sigma_hat);

    std::vector<double> log10_grid(cfg.sigma_points);
    for (std::size_t i = 0; i < cfg.sigma_points; ++i) {
        const double frac =
            static_cast<double>(i) / static_cast<double>(cfg.sigma_points - 1);
        log10_grid[i] = center_log10 - cfg.sigma_decades +
                        2.0 * cfg.sigma_decades * frac;
    }
    const std::size_t m =
        m_from_ratio(cfg.m_over_kd, cfg.gen.k, cfg.gen.d);

    Json snapshot = cfg.to_json();
    snapshot["resolved"] = Json{{"sigma_hat", sigma_hat},
                                {"sigma_axis", "log10"},
                                {"log10_sigma_grid", log10_grid},
                                {"m", m},
                                {"ref_gen_seed", ref_gen.seed}};

    auto cache = std::make_shared<Fig4RepCache>(cfg, master);

    std::vector<CellJob> jobs;
    for (std::size_t li = 0; li < cfg.laws.size(); ++li) {
        const FreqLaw law = cfg.laws[li];
        for (std::size_t si = 0; si < cfg.sigma_points; ++si) {
            const double sigma = std::pow(10.0, log10_grid[si]);
            for (std::size_t rep = 0; rep < cfg.seeds_per_point; ++rep) {
                const std::uint64_t freq_seed = master.derive(kSaltFrequencies)
                                                    .derive(li)
                                                    .derive(si)
                                                    .derive(rep)
                                                    .key();
                const Rng decode_root =
                    master.derive(kSaltDecode).derive(li).derive(si).derive(rep);
                const std::uint64_t kmeans_seed = decode_root.derive(1).key();
                const std::uint64_t gmm_seed = decode_root.derive(2).key();

                CellJob job;
                job.meta = Json{{"key", std::string("law=") + law_name(law) +
                                            ";sigma_idx=" + std::to_string(si) +
                                            ";rep=" + std::to_string(rep)},
                                {"law", law_name(law)},
                                {"sigma", sigma},
                                {"log10_sigma", log10_grid[si]},
                                {"sigma_idx", si},
                                {"rep", rep},
                                {"freq_seed", freq_seed},
                                {"kmeans_seed", kmeans_seed},
                                {"gmm_seed", gmm_seed}};
                job.compute = [=, &cfg]() -> Json {
                    auto rep_data = cache->get(rep);
                    FrequencyMatrix freqs = draw_frequencies(
                        m, cfg.gen.d, law, sigma, freq_seed);
                    Sketch z = empirical_sketch(rep_data->data.data, freqs);

                    DecodeOptions opts;
                    opts.k = cfg.gen.k;
                    opts.center_box = rep_data->box;
                    opts.trials = cfg.trials;
                    opts.max_inner_iterations = cfg.max_inner_iterations;
                    opts.final_polish_iterations = cfg.final_polish_iterations;

                    opts.kind = ModelKind::Dirac;
                    opts.seed = kmeans_seed;
                    DecodeResult kmeans_res = clompr_multi(z, freqs, opts);

                    opts.kind = ModelKind::Gaussian;
                    opts.seed = gmm_seed;
                    DecodeResult gmm_res = clompr_multi(z, freqs, opts);

                    EvaluationReport kmeans_report = make_report_kmeans(relative_sse(
                        rep_data->data.data, kmeans_res.model.centers, cfg.gen.k,
                        rep_data->lloyd.sse));
                    attach_costs(kmeans_report, kmeans_res.final_cost,
                                 cost(rep_data->truth_dirac, z, freqs));

                    const double loglik_decoded =
                        gmm_loglik(rep_data->data.data, gmm_res.model);
                    EvaluationReport gmm_report =
                        make_report_gmm(loglik_decoded - rep_data->loglik_truth);
                    attach_costs(gmm_report, gmm_res.final_cost,
                                 cost(rep_data->data.ground_truth, z, freqs));

                    Json out;
                    out["kmeans"] = report_to_json(kmeans_report);
                    out["gmm"] = report_to_json(gmm_report);
                    return out;
                };
                jobs.push_back(std::move(job));
            }
        }
    }

    ExperimentSummary summary =
        run_cells("fig4", snapshot, std::move(jobs), jsonl_path, workers);

    const std::string base = "clomprx" + std::to_string(cfg.trials);
    Json rows = Json::array();
    const Json ordered = std::move(summary.csv_rows);
    for (std::size_t li = 0; li < cfg.laws.size(); ++li) {
        for (std::size_t si = 0; si < cfg.sigma_points; ++si) {
            std::vector<double> rsse;
            std::size_t km_success = 0, km_fail = 0;
            std::size_t gm_success = 0, gm_fail = 0, valid = 0;
            for (const auto& rec : ordered) {
                const Json& cell = rec.at("cell");
                if (cell.at("law").get<std::string>() != law_name(cfg.laws[li]) ||
                    cell.at("sigma_idx").get<std::size_t>() != si)
                    continue;
                if (rec.at("results").contains("error")) continue;
                const Json& km = rec.at("results").at("kmeans");
                const Json& gm = rec.at("results").at("gmm");
                ++valid;
                rsse.push_back(km.at("rsse").get<double>());
                if (km.at("kmeans_success").get<bool>()) ++km_success;
                if (km.at("failure_detected").get<bool>()) ++km_fail;
                if (gm.at("gmm_success").get<bool>()) ++gm_success;
                if (gm.at("failure_detected").get<bool>()) ++gm_fail;
            }
            if (valid == 0) continue;
            rows.push_back(Json::array(
                {log10_grid[si], law_name(cfg.laws[li]), base + "_kmeans",
                 median(rsse),
                 static_cast<double>(km_success) / static_cast<double>(valid),
                 km_fail}));
            rows.push_back(Json::array(
                {log10_grid[si], law_name(cfg.laws[li]), base + "_gmm", nullptr,
                 static_cast<double>(gm_success) / static_cast<double>(valid),
                 gm_fail}));
        }
    }
    write_csv(csv_path,
              {"log10_sigma", "law", "decoder", "median_rsse", "success_rate",
               "failure_count"},
              rows);
    summary.csv_rows = std::move(rows);
    return summary;
}

ExperimentSummary run_experiment(const std::string& experiment_id, const Json& config,
                                 const std::string& jsonl_path,
                                 const std::string& csv_path, unsigned workers) {
    std::string preset_name = "desk";
    Json cfg = config.is_null() ? Json::object() : config;
    if (cfg.contains("preset")) {
        preset_name = cfg.at("preset").get<std::string>();
        cfg.erase("preset");
    }
    if (experiment_id == "fig2")
        return run_fig2(Fig2Config::from_json(cfg, preset_name), jsonl_path,
                        csv_path, workers);
    if (experiment_id == "fig3")
        return run_fig3(Fig3Config::from_json(cfg, preset_name), jsonl_path,
                        csv_path, workers);
    if (experiment_id == "fig4")
        return run_fig4(Fig4Config::from_json(cfg, preset_name), jsonl_path,
                        csv_path, workers);
    raise(ErrorCode::invalid_argument,
          "unknown experiment '" + experiment_id + "' (expected fig2|fig3|fig4)");
}

}  // namespace skl
