#pragma once

// Broadcast network design: every receiver hears the transmitted packet and
// estimates its own sensor by an affine function of the received value.
// Objective, scheduler, system matrices, subgradient oracle and the CCP
// solver, for any n >= 2.
//
// theta layout (see BroadcastPolicy): block j stacks [w_ij; b_ij] for i != j
// in increasing i. Residual notation: r_ij = x_i - w_ij x_j - b_ij, the error
// of estimating sensor i when sensor j was transmitted.

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

namespace schedest::broadcast {

namespace detail {

inline void check_dims(const BroadcastPolicy& policy, int n_sensors) {
    require_dims(policy.n_sensors() == n_sensors,
                 "broadcast policy does not match sensor count");
}

// Residuals and per-schedule costs for one observation vector.
// residuals[2(n-1)j + 2p] is unused; the residual of pair p in block j sits
// at position (n-1)j + p so the gradient loop can walk blocks linearly.
struct SampleWorkspace {
    std::vector<double> residual;  // (n-1)*n entries, block-major
    std::vector<double> cost;      // cost[j] = sum_{i != j} r_ij^2

    explicit SampleWorkspace(int n)
        : residual(static_cast<std::size_t>(n) * (n - 1)), cost(n) {}
};

inline void eval_residuals(const BroadcastPolicy& policy, std::span<const double> x,
                           SampleWorkspace& ws) {
    const int n = policy.n_sensors();
    for (int j = 0; j < n; ++j) {
        const double xj = x[j];
        const int theta_base = 2 * (n - 1) * j;
        const int res_base = (n - 1) * j;
        double cost = 0.0;
        int p = 0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const double w = policy.theta[theta_base + 2 * p];
            const double b = policy.theta[theta_base + 2 * p + 1];
            const double r = x[i] - w * xj - b;
            ws.residual[res_base + p] = r;
            cost += r * r;
            ++p;
        }
        ws.cost[j] = cost;
    }
}

// Scheduler argmin with ties to the lowest index.
inline int argmin_cost_low(const std::vector<double>& cost) {
    int best = 0;
    for (std::size_t j = 1; j < cost.size(); ++j)
        if (cost[j] < cost[best]) best = static_cast<int>(j);
    return best;
}

// Subgradient argmax of G_j = total - cost[j], i.e. argmin of cost, with the
// Algorithm-1 ">=" update: ties resolve to the highest index.
inline int argmin_cost_high(const std::vector<double>& cost) {
    int best = 0;
    for (std::size_t j = 1; j < cost.size(); ++j)
        if (cost[j] <= cost[best]) best = static_cast<int>(j);
    return best;
}

}  // namespace detail

// min_j sum_{i != j} (x_i - w_ij x_j - b_ij)^2 for a single observation.
inline double sample_objective(const BroadcastPolicy& policy, std::span<const double> x) {
    detail::check_dims(policy, static_cast<int>(x.size()));
    detail::SampleWorkspace ws(policy.n_sensors());
    detail::eval_residuals(policy, x, ws);
    return ws.cost[detail::argmin_cost_low(ws.cost)];
}

// Scheduled sensor (1-based): argmin_j of the residual cost, ties -> lowest.
inline int schedule(const BroadcastPolicy& policy, std::span<const double> x) {
    detail::check_dims(policy, static_cast<int>(x.size()));
    detail::SampleWorkspace ws(policy.n_sensors());
    detail::eval_residuals(policy, x, ws);
    return detail::argmin_cost_low(ws.cost) + 1;
}

// Gradient of G_{j*}(theta; x): zero in block j*, and for each l != j* the
// block k_l stacks -2 [x_l r_il; r_il] over i != l.
inline Eigen::VectorXd sample_subgradient(const BroadcastPolicy& policy,
                                          std::span<const double> x) {
    detail::check_dims(policy, static_cast<int>(x.size()));
    const int n = policy.n_sensors();
    detail::SampleWorkspace ws(n);
    detail::eval_residuals(policy, x, ws);
    const int jstar = detail::argmin_cost_high(ws.cost);

    Eigen::VectorXd g = Eigen::VectorXd::Zero(policy.theta.size());
    for (int l = 0; l < n; ++l) {
        if (l == jstar) continue;
        const double xl = x[l];
        const int theta_base = 2 * (n - 1) * l;
        const int res_base = (n - 1) * l;
        for (int p = 0; p < n - 1; ++p) {
            const double r = ws.residual[res_base + p];
            g[theta_base + 2 * p] = -2.0 * xl * r;
            g[theta_base + 2 * p + 1] = -2.0 * r;
        }
    }
    return g;
}

namespace detail {

constexpr std::int64_t kChunk = 4096;

// Fused backend pass: objective and mean subgradient in one sweep, chunked
// plain sums combined pairwise. n == 2 takes a branch-free specialization.
inline std::pair<double, Eigen::VectorXd> objective_and_subgradient(
    const BroadcastPolicy& policy, const SampleMatrix& data) {
    const int n = policy.n_sensors();
    const int d = static_cast<int>(policy.theta.size());
    const std::int64_t rows = data.n_samples();
    PairwiseSum obj_acc;
    std::vector<PairwiseSum> grad_acc(d);

    if (n == 2) {
        const double w10 = policy.theta[0], b10 = policy.theta[1];
        const double w01 = policy.theta[2], b01 = policy.theta[3];
        const double* p = data.raw().data();
        for (std::int64_t base = 0; base < rows; base += kChunk) {
            const std::int64_t end = std::min(base + kChunk, rows);
            double obj = 0.0, g0 = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0;
            for (std::int64_t k = base; k < end; ++k) {
                const double x0 = p[2 * k];
                const double x1 = p[2 * k + 1];
                const double r10 = x1 - w10 * x0 - b10;  // schedule sensor 1
                const double r01 = x0 - w01 * x1 - b01;  // schedule sensor 2
                const double c0 = r10 * r10;
                const double c1 = r01 * r01;
                // ties pick the highest index, as in the generic search
                const bool hi = c1 <= c0;
                obj += hi ? c1 : c0;
                g0 += hi ? -2.0 * x0 * r10 : 0.0;
                g1 += hi ? -2.0 * r10 : 0.0;
                g2 += hi ? 0.0 : -2.0 * x1 * r01;
                g3 += hi ? 0.0 : -2.0 * r01;
            }
            obj_acc.add(obj);
            grad_acc[0].add(g0);
            grad_acc[1].add(g1);
            grad_acc[2].add(g2);
            grad_acc[3].add(g3);
        }
    } else {
        SampleWorkspace ws(n);
        std::vector<double> grad_chunk(d);
        for (std::int64_t base = 0; base < rows; base += kChunk) {
            const std::int64_t end = std::min(base + kChunk, rows);
            double obj = 0.0;
            std::fill(grad_chunk.begin(), grad_chunk.end(), 0.0);
            for (std::int64_t k = base; k < end; ++k) {
                const auto x = data.row(k);
                eval_residuals(policy, x, ws);
                const int jstar = argmin_cost_high(ws.cost);
                obj += ws.cost[argmin_cost_low(ws.cost)];
                for (int l = 0; l < n; ++l) {
                    if (l == jstar) continue;
                    const double xl = x[l];
                    const int theta_base = 2 * (n - 1) * l;
                    const int res_base = (n - 1) * l;
                    for (int q = 0; q < n - 1; ++q) {
                        const double r = ws.residual[res_base + q];
                        grad_chunk[theta_base + 2 * q] += -2.0 * xl * r;
                        grad_chunk[theta_base + 2 * q + 1] += -2.0 * r;
                    }
                }
            }
            obj_acc.add(obj);
            for (int i = 0; i < d; ++i) grad_acc[i].add(grad_chunk[i]);
        }
    }

    const double inv_n = 1.0 / static_cast<double>(rows);
    Eigen::VectorXd g(d);
    for (int i = 0; i < d; ++i) g[i] = grad_acc[i].total() * inv_n;
    return {obj_acc.total() * inv_n, std::move(g)};
}

}  // namespace detail

// Backend mean of the scheduled minimum residual cost. Shares the fused
// kernel so the value is bit-identical to the CCP trace's entries.
inline double objective(const BroadcastPolicy& policy, const ExpectationBackend& backend) {
    detail::check_dims(policy, backend.n_sensors());
    return detail::objective_and_subgradient(policy, backend.data()).first;
}

// Convex/concave split. F sums every residual square; G_j drops the terms
// whose side information is sensor j (all ordered pairs (i,l), i != l,
// l != j) and G takes the max over j. F - G equals the objective per sample.
inline std::pair<double, double> doc_parts(const BroadcastPolicy& policy,
                                           const ExpectationBackend& backend) {
    detail::check_dims(policy, backend.n_sensors());
    const auto& data = backend.data();
    const int n = policy.n_sensors();
    detail::SampleWorkspace ws(n);
    PairwiseSum f_acc, g_acc;
    for (std::int64_t base = 0; base < data.n_samples(); base += detail::kChunk) {
        const std::int64_t end = std::min(base + detail::kChunk, data.n_samples());
        double f = 0.0, g = 0.0;
        for (std::int64_t k = base; k < end; ++k) {
            detail::eval_residuals(policy, data.row(k), ws);
            double total = 0.0;
            for (int l = 0; l < n; ++l) total += ws.cost[l];
            double gmax = 0.0;
            for (int j = 0; j < n; ++j) {
                double gj = 0.0;
                for (int l = 0; l < n; ++l)
                    if (l != j) gj += ws.cost[l];
                if (j == 0 || gj > gmax) gmax = gj;
            }
            f += total;
            g += gmax;
        }
        f_acc.add(f);
        g_acc.add(g);
    }
    const double inv_n = 1.0 / static_cast<double>(data.n_samples());
    return {f_acc.total() * inv_n, g_acc.total() * inv_n};
}

inline Eigen::VectorXd subgradient(const BroadcastPolicy& policy,
                                   const ExpectationBackend& backend) {
    detail::check_dims(policy, backend.n_sensors());
    return detail::objective_and_subgradient(policy, backend.data()).second;
}

// ---------------------------------------------------------------------------
// The linear system behind the CCP step: A = 2 diag(A_1..A_n) with each 2x2
// block A_j repeated (n-1) times to act on block theta_j, and b stacking
// 2 [E[X_i X_j]; E[X_i]] per pair. The stored blocks include the factor 2.
// ---------------------------------------------------------------------------

class CcpLinearSystem {
public:
    CcpLinearSystem(std::vector<Eigen::Matrix2d> a_blocks, Eigen::VectorXd b, int n)
        : a_blocks_(std::move(a_blocks)), b_(std::move(b)), n_(n) {}

    int n_sensors() const { return n_; }
    int dimension() const { return static_cast<int>(b_.size()); }
    const std::vector<Eigen::Matrix2d>& a_blocks() const { return a_blocks_; }
    const Eigen::VectorXd& b() const { return b_; }

    // x = A^{-1} rhs via the closed-form 2x2 inverse, block by block.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        require_dims(rhs.size() == b_.size(), "rhs length does not match system");
        Eigen::VectorXd x(rhs.size());
        for (int j = 0; j < n_; ++j) {
            const auto& blk = a_blocks_[j];
            const double det = blk(0, 0) * blk(1, 1) - blk(0, 1) * blk(1, 0);
            const int base = 2 * (n_ - 1) * j;
            for (int p = 0; p < n_ - 1; ++p) {
                const double u = rhs[base + 2 * p];
                const double v = rhs[base + 2 * p + 1];
                x[base + 2 * p] = (blk(1, 1) * u - blk(0, 1) * v) / det;
                x[base + 2 * p + 1] = (-blk(1, 0) * u + blk(0, 0) * v) / det;
            }
        }
        return x;
    }

    // A * theta, blockwise.
    Eigen::VectorXd apply(const Eigen::VectorXd& theta) const {
        require_dims(theta.size() == b_.size(), "theta length does not match system");
        Eigen::VectorXd y(theta.size());
        for (int j = 0; j < n_; ++j) {
            const auto& blk = a_blocks_[j];
            const int base = 2 * (n_ - 1) * j;
            for (int p = 0; p < n_ - 1; ++p) {
                const double w = theta[base + 2 * p];
                const double b = theta[base + 2 * p + 1];
                y[base + 2 * p] = blk(0, 0) * w + blk(0, 1) * b;
                y[base + 2 * p + 1] = blk(1, 0) * w + blk(1, 1) * b;
            }
        }
        return y;
    }

    // Dense assembly, for cross-checks against the blockwise path.
    Eigen::MatrixXd dense() const {
        const int d = dimension();
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
        for (int j = 0; j < n_; ++j) {
            const int base = 2 * (n_ - 1) * j;
            for (int p = 0; p < n_ - 1; ++p)
                a.block<2, 2>(base + 2 * p, base + 2 * p) = a_blocks_[j];
        }
        return a;
    }

    // Smallest eigenvalue of A over the 2x2 blocks, in closed form.
    double min_eigenvalue() const {
        double lo = 0.0;
        for (int j = 0; j < n_; ++j) {
            const auto& blk = a_blocks_[j];
            const double tr = blk(0, 0) + blk(1, 1);
            const double gap = blk(0, 0) - blk(1, 1);
            const double disc = std::sqrt(gap * gap + 4.0 * blk(0, 1) * blk(0, 1));
            const double lmin = 0.5 * (tr - disc);
            if (j == 0 || lmin < lo) lo = lmin;
        }
        return lo;
    }

private:
    std::vector<Eigen::Matrix2d> a_blocks_;
    Eigen::VectorXd b_;
    int n_;
};

inline CcpLinearSystem build_ccp_system(const MomentSet& moments) {
    moments.validate();
    const int n = moments.dimension();
    if (n < 2) throw TooFewSensorsError("system needs n >= 2");
    std::vector<Eigen::Matrix2d> blocks(n);
    for (int j = 0; j < n; ++j) {
        blocks[j] << 2.0 * moments.second(j, j), 2.0 * moments.mean[j],
            2.0 * moments.mean[j], 2.0;
    }
    Eigen::VectorXd b(BroadcastPolicy::dim(n));
    for (int j = 0; j < n; ++j) {
        const int base = 2 * (n - 1) * j;
        int p = 0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            b[base + 2 * p] = 2.0 * moments.second(i, j);
            b[base + 2 * p + 1] = 2.0 * moments.mean[i];
            ++p;
        }
    }
    return CcpLinearSystem(std::move(blocks), std::move(b), n);
}

// Surrogate minimizer: theta+ = A^{-1} (g + b).
inline BroadcastPolicy ccp_step(const CcpLinearSystem& system, const Eigen::VectorXd& g) {
    return BroadcastPolicy(system.solve(g + system.b()), system.n_sensors());
}

// Spectral radius of A^{-1} = 1 / lambda_min(A); the constant step size the
// preconditioned-subgradient view of the recursion corresponds to.
inline double ccp_step_size(const CcpLinearSystem& system) {
    return 1.0 / system.min_eigenvalue();
}

inline std::pair<BroadcastPolicy, CcpTrace> ccp(const BroadcastPolicy& init,
                                                const ExpectationBackend& backend,
                                                const CcpOptions& opts = {}) {
    detail::check_dims(init, backend.n_sensors());
    const CcpLinearSystem system = build_ccp_system(backend.moments());
    auto trace = run_ccp(
        init.theta,
        [&](const Eigen::VectorXd& theta) {
            return detail::objective_and_subgradient(
                BroadcastPolicy(theta, backend.n_sensors()), backend.data());
        },
        [&](const Eigen::VectorXd& g) { return system.solve(g + system.b()); }, opts);
    BroadcastPolicy final_policy(trace.iterates.back(), backend.n_sensors());
    return {std::move(final_policy), std::move(trace)};
}

// Default restart box: weights in [-2, 2]; the bias for the pair estimating
// sensor i lies in [mean_i - 2 sigma_i, mean_i + 2 sigma_i]. Covers the
// linear-MMSE solution region.
inline InitBox default_init_box(const ExpectationBackend& backend) {
    const MomentSet m = backend.moments();
    const int n = m.dimension();
    InitBox box;
    box.low.resize(BroadcastPolicy::dim(n));
    box.high.resize(BroadcastPolicy::dim(n));
    for (int j = 0; j < n; ++j) {
        int p = 0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const int idx = BroadcastPolicy::pair_index(n, i, j);
            box.low[idx] = -2.0;
            box.high[idx] = 2.0;
            const double sigma = std::sqrt(m.variance(i));
            box.low[idx + 1] = m.mean[i] - 2.0 * sigma;
            box.high[idx + 1] = m.mean[i] + 2.0 * sigma;
            ++p;
        }
    }
    return box;
}

struct MultistartOutcome {
    BroadcastPolicy best;
    double best_value = 0.0;
    int best_index = 0;
    std::vector<CcpTrace> traces;
};

inline MultistartOutcome run_multistart(const ExpectationBackend& backend, int restarts,
                                        const InitBox& box, std::uint64_t seed,
                                        const CcpOptions& opts = {}, int threads = 0) {
    auto ms = multistart(restarts, box, seed, opts, threads,
                         [&](const Eigen::VectorXd& init) {
                             return ccp(BroadcastPolicy(init, backend.n_sensors()),
                                        backend, opts)
                                 .second;
                         });
    MultistartOutcome out;
    out.best = BroadcastPolicy(std::move(ms.best), backend.n_sensors());
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

}  // namespace schedest::broadcast
