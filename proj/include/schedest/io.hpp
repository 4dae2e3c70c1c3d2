#pragma once

// File formats for the CLI: CSV datasets, JSON mixture configs, policies and
// reports, plus the run manifest embedded in every report.
//
// CSV datasets: header "x1,...,xn", one row per sample, 17 significant
// digits (lossless double round-trip), newline-only line endings.
// JSON files carry an explicit schema_version field.

#include <json.hpp>

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "schedest/learning.hpp"
#include "schedest/model.hpp"

namespace schedest {

struct IoError : Error {
    using Error::Error;
};

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string command;
    std::string config_digest;  // hex FNV-1a of the resolved config JSON
    std::uint64_t seed = 0;
    std::string artifact_version = kArtifactVersion;
    std::map<std::string, double> timings;  // phase -> seconds; never digested
};

// FNV-1a 64-bit over the bytes of a string, as a zero-padded hex string.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_digest(const nlohmann::json& resolved_config) {
    return fnv1a_hex(resolved_config.dump());
}

inline nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"config_digest", m.config_digest},
            {"seed", m.seed},
            {"artifact_version", m.artifact_version},
            {"timings", m.timings}};
}

// ---------------------------------------------------------------------------
// CSV datasets
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_dataset_csv(std::ostream& out, const SampleMatrix& data) {
    for (int i = 0; i < data.n_sensors(); ++i)
        out << (i == 0 ? "x" : ",x") << (i + 1);
    out << '\n';
    for (std::int64_t k = 0; k < data.n_samples(); ++k) {
        const auto row = data.row(k);
        for (int i = 0; i < data.n_sensors(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
}

inline void write_dataset_csv(const std::string& path, const SampleMatrix& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_dataset_csv(out, data);
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline SampleMatrix read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    int n = 1;
    for (char c : line)
        if (c == ',') ++n;

    std::vector<double> flat;
    std::int64_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        int fields = 0;
        while (true) {
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc())
                throw IoError("'" + path + "': bad number at line " +
                              std::to_string(row_no));
            flat.push_back(v);
            ++fields;
            p = next;
            if (p == end) break;
            if (*p != ',')
                throw IoError("'" + path + "': expected ',' at line " +
                              std::to_string(row_no));
            ++p;
        }
        if (fields != n)
            throw IoError("'" + path + "': expected " + std::to_string(n) +
                          " fields at line " + std::to_string(row_no));
    }
    if (flat.empty()) throw IoError("'" + path + "': no data rows");
    return SampleMatrix(std::move(flat), n);
}

// ---------------------------------------------------------------------------
// Mixture configs
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const GaussianMixtureSpec& spec) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : spec.components()) {
        nlohmann::json mean = nlohmann::json::array();
        for (Eigen::Index i = 0; i < c.mean.size(); ++i) mean.push_back(c.mean[i]);
        nlohmann::json cov = nlohmann::json::array();
        for (Eigen::Index i = 0; i < c.covariance.rows(); ++i) {
            nlohmann::json covrow = nlohmann::json::array();
            for (Eigen::Index j = 0; j < c.covariance.cols(); ++j)
                covrow.push_back(c.covariance(i, j));
            cov.push_back(covrow);
        }
        comps.push_back({{"weight", c.weight}, {"mean", mean}, {"covariance", cov}});
    }
    return {{"schema_version", kSchemaVersion}, {"components", comps}};
}

inline GaussianMixtureSpec mixture_from_json(const nlohmann::json& j) {
    try {
        std::vector<MixtureComponent> comps;
        for (const auto& cj : j.at("components")) {
            MixtureComponent c;
            c.weight = cj.at("weight").get<double>();
            const auto& mean = cj.at("mean");
            c.mean.resize(static_cast<Eigen::Index>(mean.size()));
            for (std::size_t i = 0; i < mean.size(); ++i) c.mean[i] = mean[i].get<double>();
            const auto& cov = cj.at("covariance");
            c.covariance.resize(static_cast<Eigen::Index>(cov.size()),
                                static_cast<Eigen::Index>(cov.size()));
            for (std::size_t r = 0; r < cov.size(); ++r) {
                if (cov[r].size() != cov.size())
                    throw ConfigError("covariance must be square");
                for (std::size_t s = 0; s < cov.size(); ++s)
                    c.covariance(static_cast<Eigen::Index>(r),
                                 static_cast<Eigen::Index>(s)) = cov[r][s].get<double>();
            }
            comps.push_back(std::move(c));
        }
        return GaussianMixtureSpec(std::move(comps));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad mixture config: ") + e.what());
    }
}

inline GaussianMixtureSpec read_mixture_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return mixture_from_json(j);
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

inline constexpr char kThetaLayoutNote[] =
    "blocks ordered by side-information sensor j; within block j, pairs "
    "[w_ij, b_ij] for i != j in increasing i";

inline nlohmann::json to_json(const Policy& p) {
    nlohmann::json values = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.values.size(); ++i) values.push_back(p.values[i]);
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"mode", mode_name(p.mode)},
                        {"n", p.n}};
    if (p.mode == Mode::Unicast) {
        j["xhat"] = values;
    } else {
        j["theta"] = values;
        j["theta_layout"] = kThetaLayoutNote;
    }
    return j;
}

inline Policy policy_from_json(const nlohmann::json& j) {
    try {
        const Mode mode = mode_from_name(j.at("mode").get<std::string>());
        const int n = j.at("n").get<int>();
        const auto& arr = j.at(mode == Mode::Unicast ? "xhat" : "theta");
        Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
        for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
        return Policy(mode, n, std::move(v));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad policy file: ") + e.what());
    }
}

inline Policy read_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return policy_from_json(j);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const RiskReport& r) {
    nlohmann::json exc = nlohmann::json::array();
    for (const auto& [eps, freq] : r.exceedance)
        exc.push_back({{"epsilon", eps}, {"frequency", freq}});
    return {{"schema_version", kSchemaVersion},
            {"j_train", r.j_train},
            {"j_test_values", r.j_test_values},
            {"mean_j_test", r.mean_j_test},
            {"exceedance", exc},
            {"success", r.success}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

}  // namespace schedest
