#include "core/serialize.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "core/sketch.hpp"

namespace skl {

namespace {

std::string fingerprint_hex(std::uint64_t fp) {
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << fp;
    return out.str();
}

std::uint64_t fingerprint_from_hex(const std::string& hex) {
    require(!hex.empty() && hex.size() <= 16, ErrorCode::parse_error,
            "malformed fingerprint string");
    std::uint64_t value = 0;
    for (char c : hex) {
        value <<= 4;
        if (c >= '0' && c <= '9')
            value |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            value |= static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F')
            value |= static_cast<std::uint64_t>(c - 'A' + 10);
        else
            raise(ErrorCode::parse_error, "malformed fingerprint string");
    }
    return value;
}

template <typename Fn>
auto wrap_parse(const std::string& what, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(ErrorCode::parse_error, what + ": " + e.what());
    }
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed,
                         const std::string& what) {
    require(j.is_object(), ErrorCode::parse_error, what + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        require(known, ErrorCode::parse_error,
                what + ": unknown key \"" + item.key() + "\"");
    }
}

Json matrix_to_json(const std::vector<double>& flat, std::size_t rows,
                    std::size_t cols) {
    Json out = Json::array();
    for (std::size_t r = 0; r < rows; ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < cols; ++c) row.push_back(flat[r * cols + c]);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<double> matrix_from_json(const Json& j, std::size_t rows,
                                     std::size_t cols, const std::string& what) {
    require(j.is_array() && j.size() == rows, ErrorCode::parse_error,
            what + ": expected " + std::to_string(rows) + " rows");
    std::vector<double> flat;
    flat.reserve(rows * cols);
    for (const auto& row : j) {
        require(row.is_array() && row.size() == cols, ErrorCode::parse_error,
                what + ": expected " + std::to_string(cols) + " columns per row");
        for (const auto& v : row) flat.push_back(v.get<double>());
    }
    return flat;
}

}  // namespace

Json sketch_to_json(const Sketch& z, const FrequencyMatrix& freqs) {
    require(z.size() == freqs.m, ErrorCode::dimension_mismatch,
            "sketch length does not match frequency count");
    require(z.fingerprint == freqs.fingerprint(), ErrorCode::incompatible_sketch,
            "sketch fingerprint does not match the frequency draw");
    Json j;
    j["m"] = freqs.m;
    j["d"] = freqs.d;
    j["law"] = law_name(freqs.law);
    j["sigma"] = freqs.sigma;
    j["seed"] = freqs.seed;
    j["n"] = z.n;
    Json re = Json::array(), im = Json::array();
    for (std::size_t i = 0; i < z.size(); ++i) {
        re.push_back(z.re(i));
        im.push_back(z.im(i));
    }
    j["z_re"] = std::move(re);
    j["z_im"] = std::move(im);
    j["fingerprint"] = fingerprint_hex(z.fingerprint);
    return j;
}

std::pair<Sketch, FrequencyMatrix> sketch_from_json(const Json& j) {
    return wrap_parse("sketch json", [&]() -> std::pair<Sketch, FrequencyMatrix> {
        const std::size_t m = j.at("m").get<std::size_t>();
        const std::size_t d = j.at("d").get<std::size_t>();
        const FreqLaw law = law_from_name(j.at("law").get<std::string>());
        const double sigma = j.at("sigma").get<double>();
        const std::uint64_t seed = j.at("seed").get<std::uint64_t>();

        FrequencyMatrix freqs = draw_frequencies(m, d, law, sigma, seed);
        const std::uint64_t expected =
            fingerprint_from_hex(j.at("fingerprint").get<std::string>());
        require(freqs.fingerprint() == expected, ErrorCode::incompatible_sketch,
                "sketch fingerprint does not match the regenerated frequencies");

        Sketch z;
        const auto& re = j.at("z_re");
        const auto& im = j.at("z_im");
        require(re.is_array() && im.is_array() && re.size() == m && im.size() == m,
                ErrorCode::parse_error, "sketch arrays must both have length m");
        z.values.resize(2 * m);
        for (std::size_t i = 0; i < m; ++i) {
            z.values[2 * i] = re[i].get<double>();
            z.values[2 * i + 1] = im[i].get<double>();
        }
        z.n = j.at("n").get<std::uint64_t>();
        z.fingerprint = expected;
        return {std::move(z), std::move(freqs)};
    });
}

void save_sketch(const Sketch& z, const FrequencyMatrix& freqs,
                 const std::string& path) {
    save_json_file(sketch_to_json(z, freqs), path);
}

std::pair<Sketch, FrequencyMatrix> load_sketch(const std::string& path) {
    return sketch_from_json(load_json_file(path));
}

Json model_to_json(const MixtureModel& model) {
    Json j;
    j["kind"] = kind_name(model.kind);
    j["k"] = model.k;
    j["d"] = model.d;
    j["weights"] = model.weights;
    j["centers"] = matrix_to_json(model.centers, model.k, model.d);
    if (model.kind == ModelKind::Gaussian)
        j["variances"] = matrix_to_json(model.variances, model.k, model.d);
    return j;
}

MixtureModel model_from_json(const Json& j) {
    return wrap_parse("model json", [&]() -> MixtureModel {
        MixtureModel model;
        model.kind = kind_from_name(j.at("kind").get<std::string>());
        model.k = j.at("k").get<std::size_t>();
        model.d = j.at("d").get<std::size_t>();
        const auto& w = j.at("weights");
        require(w.is_array() && w.size() == model.k, ErrorCode::parse_error,
                "model json: weights must have length k");
        model.weights = w.get<std::vector<double>>();
        model.centers = matrix_from_json(j.at("centers"), model.k, model.d,
                                         "model json centers");
        if (model.kind == ModelKind::Gaussian)
            model.variances = matrix_from_json(j.at("variances"), model.k, model.d,
                                               "model json variances");
        model.validate();
        return model;
    });
}

Json decode_result_to_json(const DecodeResult& result, const MixtureModel& model) {
    Json j = model_to_json(model);
    j["final_cost"] = result.final_cost;
    Json trace = Json::array();
    for (const auto& [iter, value] : result.cost_trace)
        trace.push_back(Json::array({iter, value}));
    j["cost_trace"] = std::move(trace);
    j["seed"] = result.seed;
    j["elapsed_ms"] = result.elapsed_ms;
    return j;
}

Json report_to_json(const EvaluationReport& report) {
    Json j;
    j["rsse"] = report.has_rsse ? Json(report.rsse) : Json(nullptr);
    j["loglik_ratio"] = report.has_loglik ? Json(report.loglik_ratio) : Json(nullptr);
    j["kmeans_success"] =
        report.has_rsse ? Json(report.kmeans_success) : Json(nullptr);
    j["gmm_success"] = report.has_loglik ? Json(report.gmm_success) : Json(nullptr);
    j["failure_detected"] =
        report.has_costs ? Json(report.failure_detected) : Json(nullptr);
    j["cost_decoded"] = report.has_costs ? Json(report.cost_decoded) : Json(nullptr);
    j["cost_ground_truth"] =
        report.has_costs ? Json(report.cost_ground_truth) : Json(nullptr);
    return j;
}

Json generator_config_to_json(const GeneratorConfig& cfg) {
    Json j;
    j["k"] = cfg.k;
    j["d"] = cfg.d;
    j["n"] = cfg.n;
    j["separation"] = cfg.separation;
    j["within_std"] = cfg.within_std;
    j["weight_mode"] = weight_mode_name(cfg.weight_mode);
    j["seed"] = cfg.seed;
    return j;
}

GeneratorConfig generator_config_from_json(const Json& j) {
    return wrap_parse("generator config", [&]() -> GeneratorConfig {
        reject_unknown_keys(
            j, {"k", "d", "n", "separation", "within_std", "weight_mode", "seed"},
            "generator config");
        GeneratorConfig cfg;
        if (j.contains("k")) cfg.k = j.at("k").get<std::size_t>();
        if (j.contains("d")) cfg.d = j.at("d").get<std::size_t>();
        if (j.contains("n")) cfg.n = j.at("n").get<std::size_t>();
        if (j.contains("separation")) cfg.separation = j.at("separation").get<double>();
        if (j.contains("within_std")) cfg.within_std = j.at("within_std").get<double>();
        if (j.contains("weight_mode"))
            cfg.weight_mode = weight_mode_from_name(j.at("weight_mode").get<std::string>());
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.validate();
        return cfg;
    });
}

namespace {

std::vector<double> bound_list(const Json& j, std::size_t d, const std::string& what) {
    std::vector<double> out;
    if (j.is_number()) {
        out.assign(d, j.get<double>());
    } else if (j.is_array()) {
        require(j.size() == d, ErrorCode::parse_error,
                what + " must be a scalar or an array of length d");
        out = j.get<std::vector<double>>();
    } else {
        raise(ErrorCode::parse_error, what + " must be a number or an array");
    }
    return out;
}

}  // namespace

DecodeRequest decode_request_from_json(const Json& j, std::size_t d) {
    return wrap_parse("decode options", [&]() -> DecodeRequest {
        reject_unknown_keys(j,
                            {"k", "model", "decoder", "trials", "box_lo", "box_hi",
                             "variance_lo", "variance_hi", "max_inner_iterations",
                             "final_polish_iterations", "seed", "genetic"},
                            "decode options");
        DecodeRequest req;
        DecodeOptions& opts = req.options;

        require(j.contains("k"), ErrorCode::parse_error,
                "decode options: missing component count \"k\"");
        opts.k = j.at("k").get<std::size_t>();
        if (j.contains("model"))
            opts.kind = kind_from_name(j.at("model").get<std::string>());

        if (j.contains("decoder")) {
            const std::string name = j.at("decoder").get<std::string>();
            if (name == "geneticl") {
                req.algorithm = DecodeRequest::Algorithm::Geneticl;
            } else if (name == "clompr") {
                req.algorithm = DecodeRequest::Algorithm::Clompr;
            } else if (name.rfind("clomprx", 0) == 0) {
                req.algorithm = DecodeRequest::Algorithm::Clompr;
                const std::string count = name.substr(7);
                require(!count.empty() &&
                            count.find_first_not_of("0123456789") == std::string::npos,
                        ErrorCode::parse_error, "malformed decoder name '" + name + "'");
                opts.trials = static_cast<std::size_t>(std::stoull(count));
                require(opts.trials >= 1, ErrorCode::parse_error,
                        "decoder trial count must be >= 1");
            } else {
                raise(ErrorCode::parse_error, "unknown decoder '" + name + "'");
            }
        }
        if (j.contains("trials")) opts.trials = j.at("trials").get<std::size_t>();

        require(j.contains("box_lo") && j.contains("box_hi"), ErrorCode::parse_error,
                "decode options: missing search box (box_lo/box_hi)");
        opts.center_box.lo = bound_list(j.at("box_lo"), d, "box_lo");
        opts.center_box.hi = bound_list(j.at("box_hi"), d, "box_hi");

        if (j.contains("variance_lo")) opts.variance_lo = j.at("variance_lo").get<double>();
        if (j.contains("variance_hi"))
            opts.variance_hi = bound_list(j.at("variance_hi"), d, "variance_hi");
        if (j.contains("max_inner_iterations"))
            opts.max_inner_iterations = j.at("max_inner_iterations").get<std::size_t>();
        if (j.contains("final_polish_iterations"))
            opts.final_polish_iterations =
                j.at("final_polish_iterations").get<std::size_t>();
        if (j.contains("seed")) opts.seed = j.at("seed").get<std::uint64_t>();

        if (j.contains("genetic")) {
            const Json& g = j.at("genetic");
            reject_unknown_keys(g,
                                {"population", "generations", "gamma",
                                 "mutation_scale", "crossover_rate", "elitism",
                                 "seed"},
                                "genetic options");
            GeneticOptions& go = req.genetic;
            if (g.contains("population")) go.population = g.at("population").get<std::size_t>();
            if (g.contains("generations")) go.generations = g.at("generations").get<std::size_t>();
            if (g.contains("gamma")) go.gamma = g.at("gamma").get<double>();
            if (g.contains("mutation_scale")) go.mutation_scale = g.at("mutation_scale").get<double>();
            if (g.contains("crossover_rate")) go.crossover_rate = g.at("crossover_rate").get<double>();
            if (g.contains("elitism")) go.elitism = g.at("elitism").get<std::size_t>();
            if (g.contains("seed")) go.seed = g.at("seed").get<std::uint64_t>();
            go.validate();
        }

        opts.validate(d);
        return req;
    });
}

Json parse_json_text(const std::string& text, const std::string& what) {
    return wrap_parse(what, [&]() -> Json { return Json::parse(text); });
}

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json_text(buf.str(), path);
}

void save_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::io_error, "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCode::io_error, "write to '" + path + "' failed");
}

}  // namespace skl
