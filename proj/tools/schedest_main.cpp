// schedest command-line front end.
//
// Subcommands: generate, train, evaluate, validate, baseline, reproduce.
// Exit codes: 0 ok, 1 reproduction band failed, 2 config error, 3 I/O error,
// 4 degenerate data, 5 dimension mismatch.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "schedest/schedest.hpp"

namespace {

using namespace schedest;
using nlohmann::json;

// Wall-clock phase timer; timings land in the manifest but never in digests.
class PhaseTimer {
public:
    void start(const std::string& phase) {
        phase_ = phase;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto t1 = std::chrono::steady_clock::now();
        timings_[phase_] += std::chrono::duration<double>(t1 - t0_).count();
    }
    const std::map<std::string, double>& timings() const { return timings_; }

private:
    std::string phase_;
    std::chrono::steady_clock::time_point t0_;
    std::map<std::string, double> timings_;
};

struct CommonFlags {
    std::uint64_t seed = 0;
    int restarts = 100;
    int max_iter = 500;
    double tol = 1e-8;
    int threads = 0;
    std::string out;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--seed", f.seed, "Master RNG seed");
    cmd->add_option("--restarts", f.restarts, "Multistart restarts");
    cmd->add_option("--max-iter", f.max_iter, "CCP iteration cap");
    cmd->add_option("--tol", f.tol, "CCP step-norm stopping tolerance");
    cmd->add_option("--threads", f.threads,
                    "Worker threads (0 = SCHEDEST_THREADS env or hardware)");
    cmd->add_option("--out", f.out, "Output path");
}

CcpOptions ccp_options_from(const CommonFlags& f) {
    CcpOptions o;
    o.max_iterations = f.max_iter;
    o.step_tolerance = f.tol;
    return o;
}

// The two-component bivariate mixture used by the bundled experiments.
GaussianMixtureSpec reference_mixture() {
    MixtureComponent a;
    a.weight = 0.75;
    a.mean = Eigen::Vector2d(0.0, 0.0);
    a.covariance = Eigen::Matrix2d::Identity();
    MixtureComponent b;
    b.weight = 0.25;
    b.mean = Eigen::Vector2d(4.0, 2.0);
    b.covariance = (Eigen::Matrix2d() << 1.0, 0.4, 0.4, 1.0).finished();
    return GaussianMixtureSpec({a, b});
}

RunManifest make_manifest(const std::string& command, const json& resolved_config,
                          std::uint64_t seed, const PhaseTimer& timer) {
    RunManifest m;
    m.command = command;
    m.config_digest = config_digest(resolved_config);
    m.seed = seed;
    m.timings = timer.timings();
    return m;
}

ExpectationBackend backend_from_policy_mode(const Policy& policy,
                                            const SampleMatrix& data) {
    require_dims(policy.n == data.n_sensors(),
                 "policy is for n=" + std::to_string(policy.n) + " but data has n=" +
                     std::to_string(data.n_sensors()));
    return ExpectationBackend::empirical(data);
}

double policy_objective(const Policy& policy, const ExpectationBackend& backend) {
    if (policy.mode == Mode::Unicast)
        return unicast::objective(policy.as_unicast(), backend);
    return broadcast::objective(policy.as_broadcast(), backend);
}

std::vector<double> schedule_frequencies(const Policy& policy, const SampleMatrix& data) {
    std::vector<std::int64_t> counts(policy.n, 0);
    if (policy.mode == Mode::Unicast) {
        const UnicastPolicy p = policy.as_unicast();
        for (std::int64_t k = 0; k < data.n_samples(); ++k)
            ++counts[unicast::schedule(p, data.row(k)) - 1];
    } else {
        const BroadcastPolicy p = policy.as_broadcast();
        for (std::int64_t k = 0; k < data.n_samples(); ++k)
            ++counts[broadcast::schedule(p, data.row(k)) - 1];
    }
    std::vector<double> freq(policy.n);
    for (int i = 0; i < policy.n; ++i)
        freq[i] = static_cast<double>(counts[i]) / static_cast<double>(data.n_samples());
    return freq;
}

// Accepts a bare policy file or a train report with an embedded "policy".
Policy load_policy(const std::string& path) {
    json j = read_json(path);
    if (j.contains("policy")) j = j["policy"];
    return policy_from_json(j);
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    CommonFlags common;
    std::string config_path;
    std::int64_t count = 0;
};

int cmd_generate(const GenerateArgs& a) {
    PhaseTimer timer;
    timer.start("load");
    const GaussianMixtureSpec spec = read_mixture_config(a.config_path);
    timer.stop();
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    if (a.common.out.empty()) throw ConfigError("--out is required");

    timer.start("sample");
    const SampleMatrix data = sample_mixture(spec, a.count, a.common.seed);
    timer.stop();
    timer.start("write");
    write_dataset_csv(a.common.out, data);
    timer.stop();

    const Eigen::VectorXd mean = empirical_mean(data);
    std::cout << "wrote " << data.n_samples() << " rows x " << data.n_sensors()
              << " sensors to " << a.common.out << "\n";
    std::cout << "empirical mean:";
    for (Eigen::Index i = 0; i < mean.size(); ++i)
        std::cout << ' ' << format_double(mean[i]);
    std::cout << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    CommonFlags common;
    std::string mode = "broadcast";
    std::string data_path;
    double gap = 0.01;
};

json train_report(const TrainArgs& a, const SampleMatrix& data, PhaseTimer& timer) {
    LearningConfig cfg;
    cfg.mode = mode_from_name(a.mode);
    cfg.restarts = a.common.restarts;
    cfg.ccp_options = ccp_options_from(a.common);
    cfg.success_gap = a.gap;
    cfg.seed = a.common.seed;
    cfg.threads = a.common.threads;

    timer.start("train");
    const TrainResult result = train(data, cfg);
    timer.stop();

    const json resolved = {{"command", "train"},
                           {"mode", a.mode},
                           {"data", a.data_path},
                           {"restarts", cfg.restarts},
                           {"max_iterations", cfg.ccp_options.max_iterations},
                           {"step_tolerance", cfg.ccp_options.step_tolerance},
                           {"seed", cfg.seed}};
    json report = {{"schema_version", kSchemaVersion},
                   {"mode", a.mode},
                   {"n", result.policy.n},
                   {"policy", to_json(result.policy)},
                   {"j_train", result.j_train},
                   {"restarts", result.restarts},
                   {"trace_summary",
                    {{"best_index", result.best_index},
                     {"best_iterations", result.best_iterations},
                     {"best_final_step_norm", result.best_final_step_norm},
                     {"converged_fraction", result.converged_fraction},
                     {"step_size", result.step_size}}},
                   {"manifest", to_json(make_manifest("train", resolved, cfg.seed, timer))}};
    return report;
}

int cmd_train(const TrainArgs& a) {
    PhaseTimer timer;
    timer.start("load");
    const SampleMatrix data = read_dataset_csv(a.data_path);
    timer.stop();
    const json report = train_report(a, data, timer);
    if (!a.common.out.empty()) write_json(a.common.out, report);
    std::cout << "j_train: " << format_double(report["j_train"].get<double>()) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    CommonFlags common;
    std::string mode;
    std::string policy_path;
    std::string data_path;
};

int cmd_evaluate(const EvaluateArgs& a) {
    PhaseTimer timer;
    timer.start("load");
    const Policy policy = load_policy(a.policy_path);
    if (!a.mode.empty() && mode_from_name(a.mode) != policy.mode)
        throw ConfigError("--mode disagrees with the policy file");
    const SampleMatrix data = read_dataset_csv(a.data_path);
    timer.stop();

    timer.start("evaluate");
    const ExpectationBackend backend = backend_from_policy_mode(policy, data);
    const double j = policy_objective(policy, backend);
    const std::vector<double> freq = schedule_frequencies(policy, data);
    timer.stop();

    std::cout << "objective: " << format_double(j) << "\n";
    std::cout << "schedule frequencies:";
    for (double f : freq) std::cout << ' ' << format_double(f);
    std::cout << "\n";

    if (!a.common.out.empty()) {
        const json resolved = {{"command", "evaluate"},
                               {"policy", a.policy_path},
                               {"data", a.data_path}};
        write_json(a.common.out,
                   {{"schema_version", kSchemaVersion},
                    {"objective", j},
                    {"schedule_frequencies", freq},
                    {"n_samples", data.n_samples()},
                    {"manifest", to_json(make_manifest("evaluate", resolved, 0, timer))}});
    }
    return 0;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateArgs {
    CommonFlags common;
    std::string policy_path;
    std::string mixture_path;
    std::int64_t test_size = 100000;
    int experiments = 1000;
    std::vector<double> epsilons = {0.001, 0.002, 0.005, 0.01};
    double gap = 0.01;
    double j_train = -1.0;  // < 0: take it from the policy/train report
    std::string values_out;
};

int cmd_validate(const ValidateArgs& a) {
    PhaseTimer timer;
    timer.start("load");
    const json policy_json = read_json(a.policy_path);
    const Policy policy = policy_from_json(
        policy_json.contains("policy") ? policy_json["policy"] : policy_json);
    double j_train = a.j_train;
    if (j_train < 0.0) {
        if (!policy_json.contains("j_train"))
            throw ConfigError("--j-train not given and the policy file has no j_train");
        j_train = policy_json["j_train"].get<double>();
    }
    const GaussianMixtureSpec spec = read_mixture_config(a.mixture_path);
    timer.stop();

    timer.start("validate");
    const RiskReport report =
        repeated_validation(policy, j_train, spec, a.test_size, a.experiments,
                            a.epsilons, a.common.seed, a.gap, a.common.threads);
    timer.stop();

    std::cout << "mean j_test: " << format_double(report.mean_j_test) << " over "
              << a.experiments << " experiments (j_train " << format_double(j_train)
              << ")\n";
    std::cout << (report.success ? "success" : "failure")
              << " at relative gap threshold " << format_double(a.gap) << "\n";

    if (!a.common.out.empty()) {
        const json resolved = {{"command", "validate"},
                               {"policy", a.policy_path},
                               {"mixture", a.mixture_path},
                               {"test_size", a.test_size},
                               {"experiments", a.experiments},
                               {"epsilons", a.epsilons},
                               {"gap", a.gap},
                               {"seed", a.common.seed}};
        json j = to_json(report);
        j["manifest"] = to_json(make_manifest("validate", resolved, a.common.seed, timer));
        write_json(a.common.out, j);
    }
    if (!a.values_out.empty()) {
        std::ofstream out(a.values_out, std::ios::binary);
        if (!out) throw IoError("cannot open '" + a.values_out + "' for writing");
        out << "j_test\n";
        for (double v : report.j_test_values) out << format_double(v) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

struct BaselineArgs {
    CommonFlags common;
    std::string mixture_path;
    std::string data_path;
    std::vector<std::string> policy_paths;
    std::int64_t samples = 1000000;
};

int cmd_baseline(const BaselineArgs& a) {
    if (a.mixture_path.empty() == a.data_path.empty())
        throw ConfigError("give exactly one of --mixture or --data");
    PhaseTimer timer;

    timer.start("load");
    MomentSet moments;
    std::unique_ptr<ExpectationBackend> backend;
    if (!a.mixture_path.empty()) {
        const GaussianMixtureSpec spec = read_mixture_config(a.mixture_path);
        moments = analytic_moments(spec);
        if (!a.policy_paths.empty())
            backend = std::make_unique<ExpectationBackend>(
                ExpectationBackend::monte_carlo_mixture(spec, a.samples, a.common.seed));
    } else {
        const SampleMatrix data = read_dataset_csv(a.data_path);
        moments = empirical_moments(data);
        backend = std::make_unique<ExpectationBackend>(
            ExpectationBackend::empirical(std::move(data)));
    }
    timer.stop();

    timer.start("evaluate");
    const unicast::BlindBaseline blind = unicast::blind_baseline(moments);
    json policies = json::array();
    std::vector<double> objectives;
    for (const auto& path : a.policy_paths) {
        const Policy p = load_policy(path);
        require_dims(p.n == moments.dimension(), "policy dimension mismatch");
        const double j = policy_objective(p, *backend);
        objectives.push_back(j);
        policies.push_back({{"path", path},
                            {"mode", mode_name(p.mode)},
                            {"objective", j},
                            {"improvement_vs_blind", 1.0 - j / blind.objective}});
    }
    timer.stop();

    std::cout << "blind schedule index: " << blind.schedule_index << "\n";
    std::cout << "blind objective: " << format_double(blind.objective) << "\n";
    for (const auto& p : policies)
        std::cout << p["path"].get<std::string>() << ": objective "
                  << format_double(p["objective"].get<double>()) << " ("
                  << format_double(100.0 * p["improvement_vs_blind"].get<double>())
                  << "% better than blind)\n";

    json report = {{"schema_version", kSchemaVersion},
                   {"blind_index", blind.schedule_index},
                   {"blind_objective", blind.objective},
                   {"policies", policies}};
    if (objectives.size() >= 2) {
        const double rel = 1.0 - objectives.back() / objectives.front();
        report["improvement_last_vs_first"] = rel;
        std::cout << "improvement of last policy over first: "
                  << format_double(100.0 * rel) << "%\n";
    }
    if (!a.common.out.empty()) {
        const json resolved = {{"command", "baseline"},
                               {"mixture", a.mixture_path},
                               {"data", a.data_path},
                               {"policies", a.policy_paths},
                               {"samples", a.samples},
                               {"seed", a.common.seed}};
        report["manifest"] = to_json(make_manifest("baseline", resolved, a.common.seed, timer));
        write_json(a.common.out, report);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// reproduce: pinned-seed end-to-end experiments with pass/fail bands.
// ---------------------------------------------------------------------------

struct Band {
    std::string name;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass() const { return value >= lo && value <= hi; }
};

void print_band(const Band& b, bool& all_pass) {
    const bool ok = b.pass();
    all_pass = all_pass && ok;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << b.name << ": "
              << format_double(b.value) << " in [" << format_double(b.lo) << ", "
              << format_double(b.hi) << "]\n";
}

struct ReproduceArgs {
    CommonFlags common;
    std::string example;
};

int cmd_reproduce(const ReproduceArgs& a) {
    const GaussianMixtureSpec spec = reference_mixture();
    const std::string out_dir =
        a.common.out.empty() ? ("reproduce-" + a.example) : a.common.out;
    std::filesystem::create_directories(out_dir);
    write_json(out_dir + "/mixture.json", to_json(spec));

    const int threads = a.common.threads;
    CcpOptions opts;  // defaults: 500 iterations, 1e-8 step, 1e-10 objective
    std::vector<Band> bands;
    json bundle = {{"schema_version", kSchemaVersion}, {"example", a.example}};

    if (a.example == "unicast-mixture") {
        const auto backend =
            ExpectationBackend::monte_carlo_mixture(spec, 1000000, 20250617);
        const auto outcome = unicast::run_multistart(backend, 250, 7, opts, threads);
        const auto blind = unicast::blind_baseline(analytic_moments(spec));
        bands.push_back({"objective", outcome.best_value, 0.8065 - 0.02, 0.8065 + 0.02});
        bands.push_back({"xhat[0]", outcome.best.xhat[0], 0.0045 - 0.05, 0.0045 + 0.05});
        bands.push_back({"xhat[1]", outcome.best.xhat[1], 1.5900 - 0.05, 1.5900 + 0.05});
        bands.push_back({"blind objective", blind.objective, 1.75, 1.75});
        bands.push_back({"improvement vs blind", 1.0 - outcome.best_value / blind.objective,
                         0.52, 0.56});
        bundle["policy"] = to_json(Policy::from(outcome.best));
        bundle["objective"] = outcome.best_value;
        bundle["blind_objective"] = blind.objective;
    } else if (a.example == "broadcast-mixture") {
        const auto backend =
            ExpectationBackend::monte_carlo_mixture(spec, 1000000, 20250617);
        const auto uni = unicast::run_multistart(backend, 250, 7, opts, threads);
        const auto bc = broadcast::run_multistart(backend, 200, 11, opts, threads);
        const double theta_ref[4] = {0.4238, 0.2151, -0.2390, 0.0624};
        bands.push_back({"objective", bc.best_value, 0.5276 - 0.02, 0.5276 + 0.02});
        for (int i = 0; i < 4; ++i)
            bands.push_back({"theta[" + std::to_string(i) + "]", bc.best.theta[i],
                             theta_ref[i] - 0.05, theta_ref[i] + 0.05});
        bands.push_back({"improvement vs unicast", 1.0 - bc.best_value / uni.best_value,
                         0.346 - 0.02, 0.346 + 0.02});
        bundle["policy"] = to_json(Policy::from(bc.best));
        bundle["objective"] = bc.best_value;
        bundle["unicast_objective"] = uni.best_value;
    } else if (a.example == "data-driven") {
        const SampleMatrix train_data = sample_mixture(spec, 10000, 31);
        write_dataset_csv(out_dir + "/train.csv", train_data);
        LearningConfig cfg;
        cfg.mode = Mode::Broadcast;
        cfg.restarts = 200;
        cfg.ccp_options = opts;
        cfg.seed = 17;
        cfg.threads = threads;
        const TrainResult tr = train(train_data, cfg);

        const SampleMatrix test_data = sample_mixture(spec, 100000, 32);
        const double j_test = validate(tr.policy, test_data);
        const double gap = std::abs(j_test - tr.j_train) / tr.j_train;
        const bool success = decide(tr.j_train, j_test, 0.02);

        const RiskReport rep = repeated_validation(tr.policy, tr.j_train, spec, 100000,
                                                   1000, {0.001, 0.002, 0.005, 0.01, 0.05},
                                                   33, 0.02, threads);
        const auto pop_backend = ExpectationBackend::monte_carlo_mixture(spec, 1000000, 34);
        const double j_pop = policy_objective(tr.policy, pop_backend);

        bands.push_back({"j_train", tr.j_train, 0.50, 0.56});
        bands.push_back({"train/test relative gap", gap, 0.0, 0.02});
        bands.push_back({"decide(success)", success ? 1.0 : 0.0, 1.0, 1.0});
        bands.push_back({"mean j_test vs population (relative)",
                         std::abs(rep.mean_j_test - j_pop) / j_pop, 0.0, 0.01});
        bundle["policy"] = to_json(tr.policy);
        bundle["j_train"] = tr.j_train;
        bundle["j_test"] = j_test;
        bundle["j_population_estimate"] = j_pop;
        bundle["risk_report"] = to_json(rep);
    } else {
        throw ConfigError("unknown example '" + a.example +
                          "' (unicast-mixture | broadcast-mixture | data-driven)");
    }

    bool all_pass = true;
    for (const auto& b : bands) print_band(b, all_pass);
    json bands_json = json::array();
    for (const auto& b : bands)
        bands_json.push_back({{"name", b.name},
                              {"value", b.value},
                              {"low", b.lo},
                              {"high", b.hi},
                              {"pass", b.pass()}});
    bundle["bands"] = bands_json;
    bundle["pass"] = all_pass;
    write_json(out_dir + "/report.json", bundle);
    std::cout << (all_pass ? "all bands passed" : "some bands FAILED") << "\n";
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint sensor-scheduling and remote-estimation design"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* c_gen = app.add_subcommand("generate", "Sample a dataset from a mixture config");
    c_gen->add_option("--config", gen.config_path, "Mixture config JSON")->required();
    c_gen->add_option("--count", gen.count, "Number of rows")->required();
    add_common_flags(c_gen, gen.common);

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Fit a policy on a CSV dataset");
    c_tr->add_option("--mode", tr.mode, "unicast | broadcast")->required();
    c_tr->add_option("--data", tr.data_path, "Training dataset CSV")->required();
    c_tr->add_option("--gap", tr.gap, "Success gap threshold stored in the report");
    add_common_flags(c_tr, tr.common);

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "Evaluate a policy on a CSV dataset");
    c_ev->add_option("--mode", ev.mode, "Cross-check against the policy's mode");
    c_ev->add_option("--policy", ev.policy_path, "Policy or train-report JSON")->required();
    c_ev->add_option("--data", ev.data_path, "Dataset CSV")->required();
    add_common_flags(c_ev, ev.common);

    ValidateArgs va;
    auto* c_va = app.add_subcommand("validate", "Repeated out-of-sample validation");
    c_va->add_option("--policy", va.policy_path, "Policy or train-report JSON")->required();
    c_va->add_option("--mixture", va.mixture_path, "Mixture config JSON")->required();
    c_va->add_option("--test-size", va.test_size, "Rows per test set");
    c_va->add_option("--experiments", va.experiments, "Number of test sets");
    c_va->add_option("--epsilons", va.epsilons, "Exceedance thresholds");
    c_va->add_option("--gap", va.gap, "Success gap threshold");
    c_va->add_option("--j-train", va.j_train, "Training risk (else read from report)");
    c_va->add_option("--values-out", va.values_out, "CSV of per-experiment j_test");
    add_common_flags(c_va, va.common);

    BaselineArgs ba;
    auto* c_ba = app.add_subcommand("baseline", "Blind-scheduler baseline and comparisons");
    c_ba->add_option("--mixture", ba.mixture_path, "Mixture config JSON");
    c_ba->add_option("--data", ba.data_path, "Dataset CSV");
    c_ba->add_option("--policy", ba.policy_paths, "Policies to compare (repeatable)");
    c_ba->add_option("--samples", ba.samples, "Monte Carlo samples when using --mixture");
    add_common_flags(c_ba, ba.common);

    ReproduceArgs re;
    auto* c_re = app.add_subcommand("reproduce", "Run a bundled experiment against its bands");
    c_re->add_option("example", re.example,
                     "unicast-mixture | broadcast-mixture | data-driven")
        ->required();
    add_common_flags(c_re, re.common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*c_gen) return cmd_generate(gen);
        if (*c_tr) return cmd_train(tr);
        if (*c_ev) return cmd_evaluate(ev);
        if (*c_va) return cmd_validate(va);
        if (*c_ba) return cmd_baseline(ba);
        if (*c_re) return cmd_reproduce(re);
    } catch (const DimensionMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const DegenerateVarianceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NonFiniteError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const TooFewSensorsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const EmptyDataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
