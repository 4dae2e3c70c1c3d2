#pragma once

// Shared convex-concave procedure machinery: stopping rules, the iteration
// loop, and seeded multistart. Mode specifics (the surrogate minimizer and
// the fused objective/subgradient pass) are injected by the callers.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "schedest/model.hpp"
#include "schedest/reduce.hpp"
#include "schedest/rng.hpp"

namespace schedest {

struct CcpOptions {
    int max_iterations = 500;
    double step_tolerance = 1e-8;        // stop when |x+ - x|_2 <= this
    double objective_tolerance = 1e-10;  // or when |J+ - J| <= this

    void validate() const {
        if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
        if (!(step_tolerance > 0.0) || !(objective_tolerance > 0.0))
            throw ConfigError("tolerances must be positive");
    }
};

// eval(x) -> (objective, subgradient of the concave part) in one data pass;
// step(g) -> minimizer of the convex surrogate built from that subgradient.
// The trace's final iterate is the returned policy vector; its objective is
// already evaluated on the full backend.
//
// Stopping: when the candidate step out of the current iterate has norm
// <= step_tolerance, the current iterate is kept, so the fixed-point residual
// at the answer is exactly the measured step norm. When the objective change
// falls to <= objective_tolerance the candidate is kept instead.
template <class EvalFn, class StepFn>
CcpTrace run_ccp(const Eigen::VectorXd& init, EvalFn&& eval, StepFn&& step,
                 const CcpOptions& opts) {
    opts.validate();
    CcpTrace trace;
    Eigen::VectorXd x = init;
    auto [obj, grad] = eval(x);
    trace.iterates.push_back(x);
    trace.objective_values.push_back(obj);

    for (int k = 1; k <= opts.max_iterations; ++k) {
        Eigen::VectorXd next = step(grad);
        const double step_norm = (next - x).norm();
        trace.final_step_norm = step_norm;
        if (step_norm <= opts.step_tolerance) {
            trace.converged = true;
            break;
        }
        auto [next_obj, next_grad] = eval(next);
        trace.iterates.push_back(next);
        trace.objective_values.push_back(next_obj);
        trace.iterations = k;
        if (std::abs(next_obj - obj) <= opts.objective_tolerance) {
            trace.converged = true;
            break;
        }
        x = std::move(next);
        obj = next_obj;
        grad = std::move(next_grad);
    }
    return trace;
}

struct InitBox {
    Eigen::VectorXd low;
    Eigen::VectorXd high;

    void validate() const {
        if (low.size() != high.size()) throw DimensionMismatchError("init box bounds");
        for (Eigen::Index i = 0; i < low.size(); ++i)
            if (!(low[i] < high[i])) throw ConfigError("init box needs low < high");
    }

    Eigen::VectorXd draw(SplitMix64& rng) const {
        Eigen::VectorXd x(low.size());
        for (Eigen::Index i = 0; i < low.size(); ++i)
            x[i] = rng.next_uniform(low[i], high[i]);
        return x;
    }
};

struct MultistartResult {
    Eigen::VectorXd best;     // final iterate of the winning restart
    double best_value = 0.0;  // its backend objective
    int best_index = 0;
    std::vector<CcpTrace> traces;  // indexed by restart
};

// Runs `run(init)` from `restarts` uniform draws in the box; restart r draws
// its start from the stream derived from (seed, r), so the result does not
// depend on the worker count. Ties in the best value go to the lowest index.
template <class RunFn>
MultistartResult multistart(int restarts, const InitBox& box, std::uint64_t seed,
                            const CcpOptions& opts, int threads, RunFn&& run) {
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    box.validate();
    opts.validate();

    MultistartResult result;
    result.traces.resize(restarts);
    parallel_for_index(restarts, threads, [&](std::int64_t r) {
        SplitMix64 rng = derive_stream(seed, static_cast<std::uint64_t>(r));
        result.traces[r] = run(box.draw(rng));
    });

    result.best_index = 0;
    result.best_value = result.traces[0].objective_values.back();
    for (int r = 1; r < restarts; ++r) {
        const double v = result.traces[r].objective_values.back();
        if (v < result.best_value) {
            result.best_value = v;
            result.best_index = r;
        }
    }
    result.best = result.traces[result.best_index].iterates.back();
    return result;
}

}  // namespace schedest
