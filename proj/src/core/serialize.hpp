#pragma once

#include <string>
#include <utility>

#include <json.hpp>

#include "core/data.hpp"
#include "core/decoders.hpp"
#include "core/tasks.hpp"
#include "core/types.hpp"

namespace skl {

using Json = nlohmann::ordered_json;

// Sketch file: {"m","d","law","sigma","seed","n","z_re","z_im","fingerprint"}.
// Omega is regenerated from the recipe on load and cross-checked against the
// stored fingerprint; it is never serialized itself.
Json sketch_to_json(const Sketch& z, const FrequencyMatrix& freqs);
std::pair<Sketch, FrequencyMatrix> sketch_from_json(const Json& j);
void save_sketch(const Sketch& z, const FrequencyMatrix& freqs,
                 const std::string& path);
std::pair<Sketch, FrequencyMatrix> load_sketch(const std::string& path);

Json model_to_json(const MixtureModel& model);
MixtureModel model_from_json(const Json& j);

Json decode_result_to_json(const DecodeResult& result, const MixtureModel& model);
Json report_to_json(const EvaluationReport& report);

Json generator_config_to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const Json& j);

// Decode request: DecodeOptions + algorithm selection + genetic knobs, parsed
// against the frequency dimension d. "decoder" accepts "clompr", "clomprxN"
// (N >= 1) and "geneticl".
struct DecodeRequest {
    enum class Algorithm { Clompr, Geneticl };
    Algorithm algorithm = Algorithm::Clompr;
    DecodeOptions options;
    GeneticOptions genetic;
};
DecodeRequest decode_request_from_json(const Json& j, std::size_t d);

Json parse_json_text(const std::string& text, const std::string& what);
Json load_json_file(const std::string& path);
void save_json_file(const Json& j, const std::string& path);

}  // namespace skl
