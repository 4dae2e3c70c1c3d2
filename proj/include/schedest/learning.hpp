#pragma once

// Data-driven workflow: fit a policy on a training set by multistart CCP,
// evaluate it on test sets, decide success or failure, and collect the
// repeated-validation statistics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "schedest/broadcast.hpp"
#include "schedest/ccp.hpp"
#include "schedest/model.hpp"
#include "schedest/reduce.hpp"
#include "schedest/rng.hpp"
#include "schedest/sampler.hpp"
#include "schedest/unicast.hpp"

namespace schedest {

enum class Mode { Unicast, Broadcast };

inline std::string mode_name(Mode m) {
    return m == Mode::Unicast ? "unicast" : "broadcast";
}

inline Mode mode_from_name(const std::string& s) {
    if (s == "unicast") return Mode::Unicast;
    if (s == "broadcast") return Mode::Broadcast;
    throw ConfigError("unknown mode '" + s + "' (expected unicast or broadcast)");
}

// A mode-tagged policy vector: xhat for unicast, theta for broadcast.
struct Policy {
    Mode mode = Mode::Unicast;
    int n = 0;
    Eigen::VectorXd values;

    Policy() = default;
    Policy(Mode m, int n_sensors, Eigen::VectorXd v)
        : mode(m), n(n_sensors), values(std::move(v)) {
        if (mode == Mode::Unicast) {
            require_dims(values.size() == n, "unicast policy length must equal n");
        } else {
            require_dims(values.size() == BroadcastPolicy::dim(n),
                         "broadcast policy length must equal 2n(n-1)");
        }
    }

    static Policy from(const UnicastPolicy& p) {
        return Policy(Mode::Unicast, p.n_sensors(), p.xhat);
    }
    static Policy from(const BroadcastPolicy& p) {
        return Policy(Mode::Broadcast, p.n_sensors(), p.theta);
    }

    UnicastPolicy as_unicast() const {
        if (mode != Mode::Unicast) throw ConfigError("policy is not a unicast policy");
        return UnicastPolicy(values);
    }
    BroadcastPolicy as_broadcast() const {
        if (mode != Mode::Broadcast)
            throw ConfigError("policy is not a broadcast policy");
        return BroadcastPolicy(values, n);
    }
};

struct LearningConfig {
    Mode mode = Mode::Broadcast;
    int restarts = 100;
    CcpOptions ccp_options;
    double success_gap = 0.01;  // relative |j_test - j_train| / j_train threshold
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = resolve from environment/hardware

    void validate() const {
        if (restarts < 1) throw ConfigError("restarts must be >= 1");
        if (!(success_gap > 0.0 && success_gap < 1.0))
            throw ConfigError("success_gap must lie in (0, 1)");
        ccp_options.validate();
    }
};

struct TrainResult {
    Policy policy;
    double j_train = 0.0;
    int restarts = 0;
    int best_index = 0;
    int best_iterations = 0;
    double best_final_step_norm = 0.0;
    double converged_fraction = 0.0;
    double step_size = 0.0;  // 0.5 for unicast; rho(A^{-1}) for broadcast
};

// Multistart CCP on the empirical backend over the training data. The
// returned risk is the best terminal objective on that data.
inline TrainResult train(const SampleMatrix& train_data, const LearningConfig& config) {
    config.validate();
    const ExpectationBackend backend = ExpectationBackend::empirical(train_data);
    TrainResult result;
    result.restarts = config.restarts;

    const auto summarize = [&result](const auto& outcome) {
        result.j_train = outcome.best_value;
        result.best_index = outcome.best_index;
        const auto& best_trace = outcome.traces[outcome.best_index];
        result.best_iterations = best_trace.iterations;
        result.best_final_step_norm = best_trace.final_step_norm;
        int converged = 0;
        for (const auto& t : outcome.traces) converged += t.converged ? 1 : 0;
        result.converged_fraction =
            static_cast<double>(converged) / static_cast<double>(outcome.traces.size());
    };

    if (config.mode == Mode::Unicast) {
        auto outcome = unicast::run_multistart(backend, config.restarts, config.seed,
                                               config.ccp_options, config.threads);
        result.policy = Policy::from(outcome.best);
        result.step_size = 0.5;
        summarize(outcome);
    } else {
        auto outcome = broadcast::run_multistart(backend, config.restarts, config.seed,
                                                 config.ccp_options, config.threads);
        result.policy = Policy::from(outcome.best);
        result.step_size =
            broadcast::ccp_step_size(broadcast::build_ccp_system(backend.moments()));
        summarize(outcome);
    }
    return result;
}

// Out-of-sample empirical risk of a fixed policy; no re-optimization.
inline double validate(const Policy& policy, const SampleMatrix& test_data) {
    const ExpectationBackend backend = ExpectationBackend::empirical(test_data);
    if (policy.mode == Mode::Unicast)
        return unicast::objective(policy.as_unicast(), backend);
    return broadcast::objective(policy.as_broadcast(), backend);
}

// Success iff the relative train/test gap is within the threshold. A zero
// training risk degenerates the ratio; then success means j_test is zero too
// (absolute floor 1e-9).
inline bool decide(double j_train, double j_test, double success_gap) {
    if (!(success_gap > 0.0)) throw ConfigError("success_gap must be positive");
    if (j_train <= 0.0) return j_test <= 1e-9;
    return std::abs(j_test - j_train) / j_train <= success_gap;
}

// Draws `experiments` independent test sets (experiment e samples with the
// seed derived from (seed, e)), evaluates the policy's risk on each and
// summarizes: mean, raw values, and for each epsilon the fraction of
// experiments with |J_test - j_train| > epsilon.
inline RiskReport repeated_validation(const Policy& policy, double j_train,
                                      const GaussianMixtureSpec& spec,
                                      std::int64_t test_size, int experiments,
                                      std::vector<double> epsilons, std::uint64_t seed,
                                      double success_gap = 0.01, int threads = 0) {
    if (experiments < 1) throw ConfigError("experiments must be >= 1");
    if (test_size < 1) throw ConfigError("test_size must be >= 1");
    for (double e : epsilons)
        if (!(e > 0.0)) throw ConfigError("epsilons must be positive");
    require_dims(policy.n == spec.dimension(), "policy/mixture dimension mismatch");

    RiskReport report;
    report.j_train = j_train;
    report.j_test_values.resize(experiments);
    parallel_for_index(experiments, threads, [&](std::int64_t e) {
        const SampleMatrix data =
            sample_mixture(spec, test_size, derive_seed(seed, static_cast<std::uint64_t>(e)));
        report.j_test_values[e] = validate(policy, data);
    });

    PairwiseSum mean_acc;
    for (double v : report.j_test_values) mean_acc.add(v);
    report.mean_j_test = mean_acc.total() / static_cast<double>(experiments);

    std::sort(epsilons.begin(), epsilons.end());
    for (double eps : epsilons) {
        std::int64_t over = 0;
        for (double v : report.j_test_values)
            if (std::abs(v - j_train) > eps) ++over;
        report.exceedance.emplace_back(
            eps, static_cast<double>(over) / static_cast<double>(experiments));
    }
    report.success = decide(j_train, report.mean_j_test, success_gap);
    return report;
}

}  // namespace schedest
