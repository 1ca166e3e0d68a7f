// extern "C" surface over the core library: opaque handles, error codes, and
// a thread-local last-error slot.

#include "sketchlearn.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "core/data.hpp"
#include "core/decoders.hpp"
#include "core/experiments.hpp"
#include "core/parallel.hpp"
#include "core/selfcheck.hpp"
#include "core/serialize.hpp"
#include "core/sketch.hpp"
#include "core/tasks.hpp"

namespace {

thread_local int g_last_code = SL_OK;
thread_local std::string g_last_message;

int code_of(skl::ErrorCode code) {
    switch (code) {
        case skl::ErrorCode::invalid_argument: return SL_ERR_INVALID_ARGUMENT;
        case skl::ErrorCode::dimension_mismatch: return SL_ERR_DIMENSION_MISMATCH;
        case skl::ErrorCode::incompatible_sketch: return SL_ERR_INCOMPATIBLE_SKETCH;
        case skl::ErrorCode::degenerate_atom: return SL_ERR_DEGENERATE_ATOM;
        case skl::ErrorCode::degenerate_scale: return SL_ERR_DEGENERATE_SCALE;
        case skl::ErrorCode::decode_failure: return SL_ERR_DECODE_FAILURE;
        case skl::ErrorCode::io_error: return SL_ERR_IO;
        case skl::ErrorCode::parse_error: return SL_ERR_PARSE;
    }
    return SL_ERR_RUNTIME;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_code = SL_OK;
        return SL_OK;
    } catch (const skl::Error& e) {
        g_last_code = code_of(e.code());
        g_last_message = e.what();
    } catch (const std::exception& e) {
        g_last_code = SL_ERR_RUNTIME;
        g_last_message = e.what();
    } catch (...) {
        g_last_code = SL_ERR_RUNTIME;
        g_last_message = "unknown error";
    }
    return g_last_code;
}

void require_arg(bool ok, const char* what) {
    if (!ok) skl::raise(skl::ErrorCode::invalid_argument, what);
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

skl::Json parse_arg_json(const char* text, const char* what) {
    require_arg(text != nullptr, "JSON argument must not be NULL");
    return skl::parse_json_text(text, what);
}

}  // namespace

struct sl_dataset {
    skl::Dataset value;
};
struct sl_frequencies {
    skl::FrequencyMatrix value;
};
struct sl_sketch {
    skl::Sketch value;
};
struct sl_model {
    skl::MixtureModel value;
};
struct sl_decode_result {
    skl::DecodeResult value;
};

extern "C" {

const char* sl_version(void) { return "0.1.0"; }

int sl_last_error_code(void) { return g_last_code; }

const char* sl_last_error_message(void) { return g_last_message.c_str(); }

void sl_string_free(char* s) { std::free(s); }

/* ---------------------------------------------------------------- dataset */

int sl_dataset_generate(const char* config_json, sl_dataset** out_data,
                        sl_model** out_truth, char** out_meta_json) {
    return guarded([&] {
        const skl::Json j = parse_arg_json(config_json, "generator config");
        const skl::GeneratorConfig cfg = skl::generator_config_from_json(j);
        skl::GeneratedData generated = skl::generate_gmm_data(cfg);
        if (out_meta_json) {
            skl::Json meta;
            meta["config"] = skl::generator_config_to_json(cfg);
            meta["ground_truth"] = skl::model_to_json(generated.ground_truth);
            meta["separation_warning"] = generated.separation_warning;
            *out_meta_json = dup_string(meta.dump(2));
        }
        if (out_truth)
            *out_truth = new sl_model{std::move(generated.ground_truth)};
        if (out_data)
            *out_data = new sl_dataset{std::move(generated.data)};
    });
}

int sl_dataset_read(const char* path, sl_dataset** out) {
    return guarded([&] {
        require_arg(path && out, "path and out must not be NULL");
        *out = new sl_dataset{skl::read_dataset(path)};
    });
}

int sl_dataset_write(const sl_dataset* ds, const char* path) {
    return guarded([&] {
        require_arg(ds && path, "dataset and path must not be NULL");
        skl::write_dataset(ds->value, path);
    });
}

int sl_dataset_import_csv(const char* path, sl_dataset** out) {
    return guarded([&] {
        require_arg(path && out, "path and out must not be NULL");
        *out = new sl_dataset{skl::import_csv(path)};
    });
}

int sl_dataset_from_array(const double* points_row_major, uint64_t n, uint64_t d,
                          sl_dataset** out) {
    return guarded([&] {
        require_arg(points_row_major && out, "points and out must not be NULL");
        skl::Dataset x;
        x.n = static_cast<std::size_t>(n);
        x.d = static_cast<std::size_t>(d);
        x.points.assign(points_row_major, points_row_major + n * d);
        x.validate();
        *out = new sl_dataset{std::move(x)};
    });
}

int sl_dataset_shape(const sl_dataset* ds, uint64_t* out_n, uint64_t* out_d) {
    return guarded([&] {
        require_arg(ds != nullptr, "dataset must not be NULL");
        if (out_n) *out_n = ds->value.n;
        if (out_d) *out_d = ds->value.d;
    });
}

int sl_dataset_copy_points(const sl_dataset* ds, double* out, uint64_t capacity) {
    return guarded([&] {
        require_arg(ds && out, "dataset and out must not be NULL");
        require_arg(capacity >= ds->value.points.size(),
                    "output buffer too small for n*d points");
        std::memcpy(out, ds->value.points.data(),
                    ds->value.points.size() * sizeof(double));
    });
}

void sl_dataset_free(sl_dataset* ds) { delete ds; }

/* ------------------------------------------------- frequencies and sketch */

int sl_frequencies_draw(uint64_t m, uint64_t d, const char* law, double sigma,
                        uint64_t seed, sl_frequencies** out) {
    return guarded([&] {
        require_arg(law && out, "law and out must not be NULL");
        *out = new sl_frequencies{skl::draw_frequencies(
            static_cast<std::size_t>(m), static_cast<std::size_t>(d),
            skl::law_from_name(law), sigma, seed)};
    });
}

int sl_frequencies_shape(const sl_frequencies* fr, uint64_t* out_m,
                         uint64_t* out_d) {
    return guarded([&] {
        require_arg(fr != nullptr, "frequencies must not be NULL");
        if (out_m) *out_m = fr->value.m;
        if (out_d) *out_d = fr->value.d;
    });
}

void sl_frequencies_free(sl_frequencies* fr) { delete fr; }

int sl_scale_heuristic(const sl_dataset* ds, uint64_t subsample_size,
                       uint64_t seed, double* out_sigma) {
    return guarded([&] {
        require_arg(ds && out_sigma, "dataset and out must not be NULL");
        *out_sigma = skl::scale_heuristic(
            ds->value, static_cast<std::size_t>(subsample_size), seed);
    });
}

int sl_sketch_compute(const sl_dataset* ds, const sl_frequencies* fr,
                      sl_sketch** out) {
    return guarded([&] {
        require_arg(ds && fr && out, "dataset, frequencies, out must not be NULL");
        *out = new sl_sketch{skl::empirical_sketch(ds->value, fr->value)};
    });
}

int sl_sketch_merge(const sl_sketch* a, const sl_sketch* b, sl_sketch** out) {
    return guarded([&] {
        require_arg(a && b && out, "sketches and out must not be NULL");
        *out = new sl_sketch{skl::merge_sketches(a->value, b->value)};
    });
}

int sl_sketch_save(const sl_sketch* sk, const sl_frequencies* fr,
                   const char* path) {
    return guarded([&] {
        require_arg(sk && fr && path, "sketch, frequencies, path must not be NULL");
        skl::save_sketch(sk->value, fr->value, path);
    });
}

int sl_sketch_load(const char* path, sl_sketch** out_sk, sl_frequencies** out_fr) {
    return guarded([&] {
        require_arg(path != nullptr, "path must not be NULL");
        auto [sk, fr] = skl::load_sketch(path);
        if (out_sk) *out_sk = new sl_sketch{std::move(sk)};
        if (out_fr) *out_fr = new sl_frequencies{std::move(fr)};
    });
}

int sl_sketch_values(const sl_sketch* sk, double* out, uint64_t capacity,
                     uint64_t* out_m, uint64_t* out_n) {
    return guarded([&] {
        require_arg(sk != nullptr, "sketch must not be NULL");
        if (out_m) *out_m = sk->value.size();
        if (out_n) *out_n = sk->value.n;
        if (out) {
            require_arg(capacity >= sk->value.values.size(),
                        "output buffer too small for 2m values");
            std::memcpy(out, sk->value.values.data(),
                        sk->value.values.size() * sizeof(double));
        }
    });
}

void sl_sketch_free(sl_sketch* sk) { delete sk; }

/* ----------------------------------------------------------------- models */

int sl_model_from_json(const char* json_text, sl_model** out) {
    return guarded([&] {
        require_arg(out != nullptr, "out must not be NULL");
        *out = new sl_model{
            skl::model_from_json(parse_arg_json(json_text, "model json"))};
    });
}

int sl_model_to_json(const sl_model* mdl, char** out_json) {
    return guarded([&] {
        require_arg(mdl && out_json, "model and out must not be NULL");
        *out_json = dup_string(skl::model_to_json(mdl->value).dump(2));
    });
}

int sl_model_sketch(const sl_model* mdl, const sl_frequencies* fr, sl_sketch** out) {
    return guarded([&] {
        require_arg(mdl && fr && out, "model, frequencies, out must not be NULL");
        *out = new sl_sketch{skl::model_sketch(mdl->value, fr->value)};
    });
}

int sl_model_cost(const sl_model* mdl, const sl_sketch* z, const sl_frequencies* fr,
                  double* out_cost) {
    return guarded([&] {
        require_arg(mdl && z && fr && out_cost, "arguments must not be NULL");
        *out_cost = skl::cost(mdl->value, z->value, fr->value);
    });
}

void sl_model_free(sl_model* mdl) { delete mdl; }

/* ----------------------------------------------------------------- decode */

int sl_decode(const sl_sketch* z, const sl_frequencies* fr,
              const char* options_json, sl_decode_result** out) {
    return guarded([&] {
        require_arg(z && fr && out, "sketch, frequencies, out must not be NULL");
        const skl::DecodeRequest req = skl::decode_request_from_json(
            parse_arg_json(options_json, "decode options"), fr->value.d);
        skl::DecodeResult result;
        if (req.algorithm == skl::DecodeRequest::Algorithm::Geneticl)
            result = skl::geneticl(z->value, fr->value, req.options, req.genetic);
        else
            result = skl::clompr_multi(z->value, fr->value, req.options,
                                       skl::resolve_workers(0));
        *out = new sl_decode_result{std::move(result)};
    });
}

int sl_decode_result_to_json(const sl_decode_result* res, char** out_json) {
    return guarded([&] {
        require_arg(res && out_json, "result and out must not be NULL");
        *out_json = dup_string(
            skl::decode_result_to_json(res->value, res->value.model).dump(2));
    });
}

int sl_decode_result_model(const sl_decode_result* res, sl_model** out) {
    return guarded([&] {
        require_arg(res && out, "result and out must not be NULL");
        *out = new sl_model{res->value.model};
    });
}

int sl_decode_result_cost(const sl_decode_result* res, double* out_cost) {
    return guarded([&] {
        require_arg(res && out_cost, "result and out must not be NULL");
        *out_cost = res->value.final_cost;
    });
}

void sl_decode_result_free(sl_decode_result* res) { delete res; }

/* ------------------------------------------------------------- evaluation */

int sl_lloyd_kmeans(const sl_dataset* ds, uint64_t k, uint64_t restarts,
                    uint64_t seed, sl_model** out_centroids, double* out_sse) {
    return guarded([&] {
        require_arg(ds != nullptr, "dataset must not be NULL");
        const skl::KMeansResult result = skl::lloyd_kmeans(
            ds->value, static_cast<std::size_t>(k),
            static_cast<std::size_t>(restarts ? restarts : 1), seed);
        if (out_sse) *out_sse = result.sse;
        if (out_centroids) {
            skl::MixtureModel model = skl::MixtureModel::dirac(result.k, result.d);
            model.centers = result.centroids;
            model.weights.assign(result.k, 1.0 / static_cast<double>(result.k));
            *out_centroids = new sl_model{std::move(model)};
        }
    });
}

int sl_evaluate(const sl_dataset* ds, const sl_model* decoded,
                const sl_model* truth, const sl_sketch* z,
                const sl_frequencies* fr, const char* options_json,
                char** out_report_json) {
    return guarded([&] {
        require_arg(ds && decoded && out_report_json,
                    "dataset, decoded model, out must not be NULL");
        std::size_t restarts = 10;
        std::uint64_t seed = 0;
        if (options_json) {
            const skl::Json j = parse_arg_json(options_json, "evaluate options");
            if (j.contains("lloyd_restarts"))
                restarts = j.at("lloyd_restarts").get<std::size_t>();
            if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
        }

        const skl::MixtureModel& model = decoded->value;
        skl::EvaluationReport report;

        const skl::KMeansResult baseline =
            skl::lloyd_kmeans(ds->value, model.k, restarts, seed);
        report = skl::make_report_kmeans(skl::relative_sse(
            ds->value, model.centers, model.k, baseline.sse));

        if (truth && model.kind == skl::ModelKind::Gaussian &&
            truth->value.kind == skl::ModelKind::Gaussian) {
            const double delta = skl::gmm_loglik(ds->value, model) -
                                 skl::gmm_loglik(ds->value, truth->value);
            const skl::EvaluationReport gmm = skl::make_report_gmm(delta);
            report.loglik_ratio = gmm.loglik_ratio;
            report.gmm_success = gmm.gmm_success;
            report.has_loglik = true;
        }
        if (truth && z && fr) {
            // The failure detector compares like against like: a Dirac decode
            // is measured against the truth's centers as a Dirac model.
            skl::MixtureModel reference = truth->value.normalized();
            if (model.kind == skl::ModelKind::Dirac &&
                reference.kind == skl::ModelKind::Gaussian) {
                skl::MixtureModel dirac = skl::MixtureModel::dirac(reference.k,
                                                                   reference.d);
                dirac.centers = reference.centers;
                dirac.weights.assign(reference.k,
                                     1.0 / static_cast<double>(reference.k));
                reference = std::move(dirac);
            }
            skl::attach_costs(report, skl::cost(model, z->value, fr->value),
                              skl::cost(reference, z->value, fr->value));
        }
        *out_report_json = dup_string(skl::report_to_json(report).dump(2));
    });
}

/* ------------------------------------------------------------ experiments */

int sl_experiment_run(const char* experiment_id, const char* config_json,
                      const char* jsonl_path, const char* csv_path, int workers,
                      char** out_summary_json) {
    return guarded([&] {
        require_arg(experiment_id && jsonl_path,
                    "experiment id and jsonl path must not be NULL");
        const skl::Json cfg = config_json
                                  ? skl::parse_json_text(config_json, "experiment config")
                                  : skl::Json(nullptr);
        const unsigned resolved =
            skl::resolve_workers(workers > 0 ? static_cast<unsigned>(workers) : 0);
        const skl::ExperimentSummary summary =
            skl::run_experiment(experiment_id, cfg, jsonl_path,
                                csv_path ? csv_path : "", resolved);
        if (out_summary_json) {
            skl::Json j;
            j["cells_total"] = summary.cells_total;
            j["cells_run"] = summary.cells_run;
            j["cells_skipped"] = summary.cells_skipped;
            *out_summary_json = dup_string(j.dump(2));
        }
    });
}

/* -------------------------------------------------------------- selfcheck */

int sl_selfcheck(uint64_t seed, int quick, int* out_ok, char** out_report) {
    return guarded([&] {
        const skl::SelfcheckResult result = skl::run_selfcheck(seed, quick != 0);
        if (out_ok) *out_ok = result.ok ? 1 : 0;
        if (out_report) *out_report = dup_string(result.report);
    });
}

}  // extern "C"
