#include "core/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "core/rng.hpp"

namespace skl {

const char* weight_mode_name(WeightMode mode) {
    return mode == WeightMode::Uniform ? "uniform" : "dirichlet5";
}

WeightMode weight_mode_from_name(const std::string& s) {
    if (s == "uniform") return WeightMode::Uniform;
    if (s == "dirichlet5") return WeightMode::Dirichlet5;
    raise(ErrorCode::parse_error,
          "unknown weight mode '" + s + "' (expected \"uniform\" or \"dirichlet5\")");
}

void GeneratorConfig::validate() const {
    require(k >= 1 && d >= 1 && n >= 1, ErrorCode::invalid_argument,
            "generator needs K, d, n >= 1");
    require(separation > 0.0 && std::isfinite(separation),
            ErrorCode::invalid_argument, "separation must be positive");
    require(within_std > 0.0 && std::isfinite(within_std),
            ErrorCode::invalid_argument, "within_std must be positive");
}

GeneratedData generate_gmm_data(const GeneratorConfig& cfg) {
    cfg.validate();

    const Rng root(cfg.seed);
    Rng center_rng = root.derive(1);
    Rng weight_rng = root.derive(2);
    Rng label_rng = root.derive(3);
    Rng noise_rng = root.derive(4);

    const double half_width =
        cfg.separation * cfg.within_std *
        std::pow(static_cast<double>(cfg.k), 1.0 / static_cast<double>(cfg.d));
    const double min_spacing =
        cfg.separation * cfg.within_std * std::sqrt(static_cast<double>(cfg.d));

    GeneratedData out;
    out.ground_truth = MixtureModel::gaussian(cfg.k, cfg.d);
    std::vector<double>& centers = out.ground_truth.centers;

    for (std::size_t c = 0; c < cfg.k; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            double* row = centers.data() + c * cfg.d;
            for (std::size_t t = 0; t < cfg.d; ++t)
                row[t] = center_rng.next_uniform(-half_width, half_width);
            placed = true;
            for (std::size_t prev = 0; prev < c && placed; ++prev) {
                double dist_sq = 0.0;
                for (std::size_t t = 0; t < cfg.d; ++t) {
                    const double diff = row[t] - centers[prev * cfg.d + t];
                    dist_sq += diff * diff;
                }
                if (std::sqrt(dist_sq) < min_spacing) placed = false;
            }
        }
        if (!placed) out.separation_warning = true;  // keep the last draw
    }

    std::vector<double>& weights = out.ground_truth.weights;
    if (cfg.weight_mode == WeightMode::Uniform) {
        weights.assign(cfg.k, 1.0 / static_cast<double>(cfg.k));
    } else {
        // Dirichlet(5): gamma(5) draws as the negative log of five uniforms.
        double total = 0.0;
        for (std::size_t c = 0; c < cfg.k; ++c) {
            double prod = 1.0;
            for (int i = 0; i < 5; ++i) prod *= weight_rng.next_unit_open();
            weights[c] = -std::log(prod);
            total += weights[c];
        }
        for (double& w : weights) w /= total;
    }

    const double variance = cfg.within_std * cfg.within_std;
    for (double& v : out.ground_truth.variances) v = variance;

    std::vector<double> cdf(cfg.k);
    double acc = 0.0;
    for (std::size_t c = 0; c < cfg.k; ++c) {
        acc += weights[c];
        cdf[c] = acc;
    }

    out.data.n = cfg.n;
    out.data.d = cfg.d;
    out.data.points.resize(cfg.n * cfg.d);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double u = label_rng.next_unit() * acc;
        std::size_t label = 0;
        while (label + 1 < cfg.k && cdf[label] < u) ++label;
        double* row = out.data.points.data() + i * cfg.d;
        const double* mu = centers.data() + label * cfg.d;
        for (std::size_t t = 0; t < cfg.d; ++t)
            row[t] = mu[t] + cfg.within_std * noise_rng.next_normal();
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'L', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    // Host is little-endian on every supported target; serialize as-is.
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool read_le(std::ifstream& in, T& value) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
    std::memcpy(&value, bytes, sizeof(T));
    return true;
}

}  // namespace

void write_dataset(const Dataset& x, const std::string& path) {
    x.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::io_error, "cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint64_t>(out, x.n);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(x.d));
    for (double v : x.points) write_le<double>(out, v);
    out.flush();
    require(out.good(), ErrorCode::io_error, "write to '" + path + "' failed");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io_error, "cannot open '" + path + "' for reading");

    char magic[4];
    require(static_cast<bool>(in.read(magic, 4)) && std::memcmp(magic, kMagic, 4) == 0,
            ErrorCode::io_error, "'" + path + "' is not a CLDS dataset (bad magic)");
    std::uint32_t version = 0;
    require(read_le(in, version) && version == kVersion, ErrorCode::io_error,
            "'" + path + "' has an unsupported dataset version");

    std::uint64_t n = 0;
    std::uint32_t d = 0;
    require(read_le(in, n) && read_le(in, d), ErrorCode::io_error,
            "'" + path + "' dataset header is truncated");
    require(n >= 1 && d >= 1, ErrorCode::io_error,
            "'" + path + "' declares an empty dataset");

    Dataset x;
    x.n = n;
    x.d = d;
    x.points.resize(static_cast<std::size_t>(n) * d);
    const std::streamsize payload =
        static_cast<std::streamsize>(x.points.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(x.points.data()), payload);
    if (in.gcount() != payload) {
        std::ostringstream msg;
        msg << "'" << path << "' payload truncated: expected "
            << (20 + payload) << " bytes, got " << (20 + in.gcount());
        raise(ErrorCode::io_error, msg.str());
    }
    x.validate();
    return x;
}

Dataset import_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io_error, "cannot open '" + path + "' for reading");

    Dataset x;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            // Only a trailing blank line is tolerated.
            std::string rest;
            while (std::getline(in, rest)) {
                if (!rest.empty() && rest.back() == '\r') rest.pop_back();
                require(rest.empty(), ErrorCode::parse_error,
                        path + ": blank line " + std::to_string(line_no) +
                            " in the middle of the data");
            }
            break;
        }
        std::vector<double> row;
        std::size_t begin = 0;
        while (begin <= line.size()) {
            std::size_t end = line.find(',', begin);
            if (end == std::string::npos) end = line.size();
            const std::string cell = line.substr(begin, end - begin);
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                // Allow surrounding whitespace only.
                for (std::size_t i = used; i < cell.size(); ++i)
                    require(std::isspace(static_cast<unsigned char>(cell[i])),
                            ErrorCode::parse_error, "trailing garbage");
                require(std::isfinite(v), ErrorCode::parse_error, "non-finite value");
                row.push_back(v);
            } catch (const Error&) {
                raise(ErrorCode::parse_error,
                      path + ": line " + std::to_string(line_no) +
                          ": malformed numeric cell '" + cell + "'");
            } catch (const std::exception&) {
                raise(ErrorCode::parse_error,
                      path + ": line " + std::to_string(line_no) +
                          ": malformed numeric cell '" + cell + "'");
            }
            begin = end + 1;
        }
        if (x.d == 0) {
            x.d = row.size();
        } else {
            require(row.size() == x.d, ErrorCode::parse_error,
                    path + ": line " + std::to_string(line_no) + ": expected " +
                        std::to_string(x.d) + " columns, got " +
                        std::to_string(row.size()));
        }
        x.points.insert(x.points.end(), row.begin(), row.end());
        ++x.n;
    }
    require(x.n >= 1, ErrorCode::parse_error, path + ": no data rows");
    x.validate();
    return x;
}

}  // namespace skl
