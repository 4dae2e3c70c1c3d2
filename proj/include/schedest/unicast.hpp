#pragma once

// Unicast network design: each receiver sees either its own sensor's value or
// an erasure, estimated by a constant. Objective, scheduler, subgradient
// oracle and the CCP solver, for any n >= 2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "schedest/ccp.hpp"
#include "schedest/model.hpp"
#include "schedest/reduce.hpp"
#include "schedest/sampler.hpp"

namespace schedest::unicast {

namespace detail {

inline void check_dims(const UnicastPolicy& policy, std::size_t n) {
    require_dims(static_cast<std::size_t>(policy.n_sensors()) == n,
                 "unicast policy length does not match sensor count");
}

// Per-sample linear search over G_j(xhat; x) = (x_j - xhat_j)^2 with the
// ">=" update, so ties resolve to the highest index. Also yields the
// residual sum (the convex part F) and the objective contribution F - max.
struct SampleEval {
    double total = 0.0;   // sum_i (x_i - xhat_i)^2
    double max_sq = 0.0;  // max_j (x_j - xhat_j)^2
    double max_res = 0.0; // residual at the argmax
    int argmax = 0;       // 0-based
};

inline SampleEval eval_sample(const Eigen::VectorXd& xhat, std::span<const double> x) {
    SampleEval e;
    e.max_sq = -1.0;
    const int n = static_cast<int>(x.size());
    for (int j = 0; j < n; ++j) {
        const double r = x[j] - xhat[j];
        const double sq = r * r;
        e.total += sq;
        if (sq >= e.max_sq) {
            e.max_sq = sq;
            e.max_res = r;
            e.argmax = j;
        }
    }
    return e;
}

}  // namespace detail

// min_j sum_{i != j} (x_i - xhat_i)^2 for a single observation vector.
inline double sample_objective(const UnicastPolicy& policy, std::span<const double> x) {
    detail::check_dims(policy, x.size());
    const auto e = detail::eval_sample(policy.xhat, x);
    return e.total - e.max_sq;
}

// Scheduled sensor (1-based): argmax_j |x_j - xhat_j|, ties to the lowest
// index. Note the subgradient oracle breaks ties the other way; the two only
// differ on exact ties.
inline int schedule(const UnicastPolicy& policy, std::span<const double> x) {
    detail::check_dims(policy, x.size());
    int best = 0;
    double best_abs = -1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double a = std::abs(x[j] - policy.xhat[j]);
        if (a > best_abs) {
            best_abs = a;
            best = static_cast<int>(j);
        }
    }
    return best + 1;
}

// -2 (x_{j*} - xhat_{j*}) e_{j*} with j* from the ">="-update linear search.
inline Eigen::VectorXd sample_subgradient(const UnicastPolicy& policy,
                                          std::span<const double> x) {
    detail::check_dims(policy, x.size());
    const auto e = detail::eval_sample(policy.xhat, x);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g[e.argmax] = -2.0 * e.max_res;
    return g;
}

namespace detail {

constexpr std::int64_t kChunk = 4096;

// Fused backend pass producing the objective and the mean subgradient
// together. Accumulation is chunked: plain sums within a 4096-row block,
// blocks combined pairwise.
inline std::pair<double, Eigen::VectorXd> objective_and_subgradient(
    const Eigen::VectorXd& xhat, const SampleMatrix& data) {
    const int n = data.n_sensors();
    const std::int64_t rows = data.n_samples();
    PairwiseSum obj_acc;
    std::vector<PairwiseSum> grad_acc(n);
    std::vector<double> grad_chunk(n);

    if (n == 2) {
        const double h0 = xhat[0], h1 = xhat[1];
        const double* p = data.raw().data();
        for (std::int64_t base = 0; base < rows; base += kChunk) {
            const std::int64_t end = std::min(base + kChunk, rows);
            double obj = 0.0, g0 = 0.0, g1 = 0.0;
            for (std::int64_t k = base; k < end; ++k) {
                const double r0 = p[2 * k] - h0;
                const double r1 = p[2 * k + 1] - h1;
                const double s0 = r0 * r0;
                const double s1 = r1 * r1;
                // ties go to the highest index, matching the generic search
                const bool pick1 = s1 >= s0;
                obj += pick1 ? s0 : s1;
                g0 += pick1 ? 0.0 : -2.0 * r0;
                g1 += pick1 ? -2.0 * r1 : 0.0;
            }
            obj_acc.add(obj);
            grad_acc[0].add(g0);
            grad_acc[1].add(g1);
        }
    } else {
        for (std::int64_t base = 0; base < rows; base += kChunk) {
            const std::int64_t end = std::min(base + kChunk, rows);
            double obj = 0.0;
            std::fill(grad_chunk.begin(), grad_chunk.end(), 0.0);
            for (std::int64_t k = base; k < end; ++k) {
                const auto e = eval_sample(xhat, data.row(k));
                obj += e.total - e.max_sq;
                grad_chunk[e.argmax] += -2.0 * e.max_res;
            }
            obj_acc.add(obj);
            for (int i = 0; i < n; ++i) grad_acc[i].add(grad_chunk[i]);
        }
    }

    const double inv_n = 1.0 / static_cast<double>(rows);
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = grad_acc[i].total() * inv_n;
    return {obj_acc.total() * inv_n, std::move(g)};
}

}  // namespace detail

// Mean over the backend of min_j sum_{i != j} (x_i - xhat_i)^2. Shares the
// fused kernel so the value is bit-identical to the CCP trace's entries.
inline double objective(const UnicastPolicy& policy, const ExpectationBackend& backend) {
    detail::check_dims(policy, backend.n_sensors());
    return detail::objective_and_subgradient(policy.xhat, backend.data()).first;
}

// Convex/concave split: F = E[sum_i (X_i - xhat_i)^2],
// G = E[max_j (X_j - xhat_j)^2]. F - G equals the objective per sample.
inline std::pair<double, double> doc_parts(const UnicastPolicy& policy,
                                           const ExpectationBackend& backend) {
    detail::check_dims(policy, backend.n_sensors());
    const auto& data = backend.data();
    PairwiseSum f_acc, g_acc;
    for (std::int64_t base = 0; base < data.n_samples(); base += detail::kChunk) {
        const std::int64_t end = std::min(base + detail::kChunk, data.n_samples());
        double f = 0.0, g = 0.0;
        for (std::int64_t k = base; k < end; ++k) {
            const auto e = detail::eval_sample(policy.xhat, data.row(k));
            f += e.total;
            g += e.max_sq;
        }
        f_acc.add(f);
        g_acc.add(g);
    }
    const double inv_n = 1.0 / static_cast<double>(data.n_samples());
    return {f_acc.total() * inv_n, g_acc.total() * inv_n};
}

// Mean of the per-sample subgradients; a subgradient of G at xhat.
inline Eigen::VectorXd subgradient(const UnicastPolicy& policy,
                                   const ExpectationBackend& backend) {
    detail::check_dims(policy, backend.n_sensors());
    return detail::objective_and_subgradient(policy.xhat, backend.data()).second;
}

// Surrogate minimizer: xhat+ = g/2 + E[X].
inline UnicastPolicy ccp_step(const Eigen::VectorXd& g, const Eigen::VectorXd& mean) {
    require_dims(g.size() == mean.size(), "subgradient/mean length mismatch");
    return UnicastPolicy(0.5 * g + mean);
}

inline std::pair<UnicastPolicy, CcpTrace> ccp(const UnicastPolicy& init,
                                              const ExpectationBackend& backend,
                                              const CcpOptions& opts = {}) {
    detail::check_dims(init, backend.n_sensors());
    const Eigen::VectorXd mean = backend.mean();
    auto trace = run_ccp(
        init.xhat,
        [&](const Eigen::VectorXd& x) {
            return detail::objective_and_subgradient(x, backend.data());
        },
        [&](const Eigen::VectorXd& g) -> Eigen::VectorXd { return 0.5 * g + mean; },
        opts);
    UnicastPolicy final_policy(trace.iterates.back());
    return {std::move(final_policy), std::move(trace)};
}

// Default restart box: [mean - 3 sigma, mean + 3 sigma] per coordinate.
// Local minima live where the probability mass is.
inline InitBox default_init_box(const ExpectationBackend& backend) {
    const MomentSet m = backend.moments();
    const int n = m.dimension();
    InitBox box;
    box.low.resize(n);
    box.high.resize(n);
    for (int i = 0; i < n; ++i) {
        const double sigma = std::sqrt(m.variance(i));
        box.low[i] = m.mean[i] - 3.0 * sigma;
        box.high[i] = m.mean[i] + 3.0 * sigma;
    }
    return box;
}

struct MultistartOutcome {
    UnicastPolicy best;
    double best_value = 0.0;
    int best_index = 0;
    std::vector<CcpTrace> traces;
};

inline MultistartOutcome run_multistart(const ExpectationBackend& backend, int restarts,
                                        const InitBox& box, std::uint64_t seed,
                                        const CcpOptions& opts = {}, int threads = 0) {
    auto ms = multistart(restarts, box, seed, opts, threads,
                         [&](const Eigen::VectorXd& init) {
                             return ccp(UnicastPolicy(init), backend, opts).second;
                         });
    MultistartOutcome out;
    out.best = UnicastPolicy(std::move(ms.best));
    out.best_value = ms.best_value;
    out.best_index = ms.best_index;
    out.traces = std::move(ms.traces);
    return out;
}

inline MultistartOutcome run_multistart(const ExpectationBackend& backend, int restarts,
                                        std::uint64_t seed, const CcpOptions& opts = {},
                                        int threads = 0) {
    return run_multistart(backend, restarts, default_init_box(backend), seed, opts,
                          threads);
}

// Blind baseline: always transmit the largest-variance sensor and estimate
// every silent sensor by its mean. Its MSE is sum_i Var(X_i) - max_i Var(X_i).
struct BlindBaseline {
    int schedule_index = 0;  // 1-based
    Eigen::VectorXd estimates;
    double objective = 0.0;
};

inline BlindBaseline blind_baseline(const MomentSet& moments) {
    moments.validate();
    const int n = moments.dimension();
    BlindBaseline b;
    b.estimates = moments.mean;
    double var_sum = 0.0, var_max = -1.0;
    for (int i = 0; i < n; ++i) {
        const double v = moments.variance(i);
        var_sum += v;
        if (v > var_max) {
            var_max = v;
            b.schedule_index = i + 1;
        }
    }
    b.objective = var_sum - var_max;
    return b;
}

}  // namespace schedest::unicast
