#pragma once

// Shared test fixtures: the reference mixture, random input generators, and
// independent oracle implementations of the objectives, the convex/concave
// parts and the n=2 indicator-form subgradient. The oracles transcribe the
// defining formulas directly and stay independent of the library kernels.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "schedest/schedest.hpp"

namespace testsup {

using schedest::BroadcastPolicy;
using schedest::SplitMix64;
using schedest::UnicastPolicy;

// Two-component bivariate mixture driving the bundled experiments:
// 3/4 N((0,0), I) + 1/4 N((4,2), [[1,.4],[.4,1]]).
inline schedest::GaussianMixtureSpec reference_mixture() {
    schedest::MixtureComponent a;
    a.weight = 0.75;
    a.mean = Eigen::Vector2d(0.0, 0.0);
    a.covariance = Eigen::Matrix2d::Identity();
    schedest::MixtureComponent b;
    b.weight = 0.25;
    b.mean = Eigen::Vector2d(4.0, 2.0);
    b.covariance = (Eigen::Matrix2d() << 1.0, 0.4, 0.4, 1.0).finished();
    return schedest::GaussianMixtureSpec({a, b});
}

inline Eigen::VectorXd random_vector(SplitMix64& rng, int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.next_uniform(lo, hi);
    return v;
}

inline bool exactly_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

inline schedest::SampleMatrix random_dataset(SplitMix64& rng, std::int64_t rows, int n,
                                             double lo = -3.0, double hi = 3.0) {
    std::vector<double> flat(static_cast<std::size_t>(rows) * n);
    for (auto& v : flat) v = rng.next_uniform(lo, hi);
    return schedest::SampleMatrix(std::move(flat), n);
}

// ---- unicast oracles -------------------------------------------------------

// min_j sum_{i != j} (x_i - xhat_i)^2, each inner sum evaluated literally.
inline double unicast_objective_oracle(const Eigen::VectorXd& xhat,
                                       std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const double r = x[i] - xhat[i];
            s += r * r;
        }
        if (j == 0 || s < best) best = s;
    }
    return best;
}

inline double unicast_f_oracle(const Eigen::VectorXd& xhat, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = x[i] - xhat[i];
        s += r * r;
    }
    return s;
}

inline double unicast_g_oracle(const Eigen::VectorXd& xhat, std::span<const double> x) {
    double m = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double r = x[j] - xhat[j];
        if (j == 0 || r * r > m) m = r * r;
    }
    return m;
}

// Dataset mean of the concave part G.
inline double unicast_g_mean_oracle(const Eigen::VectorXd& xhat,
                                    const schedest::SampleMatrix& data) {
    double s = 0.0;
    for (std::int64_t k = 0; k < data.n_samples(); ++k)
        s += unicast_g_oracle(xhat, data.row(k));
    return s / static_cast<double>(data.n_samples());
}

// ---- broadcast oracles -----------------------------------------------------

inline double residual(const BroadcastPolicy& p, std::span<const double> x, int i,
                       int j) {
    return x[i] - p.weight(i, j) * x[j] - p.bias(i, j);
}

inline double broadcast_objective_oracle(const BroadcastPolicy& p,
                                         std::span<const double> x) {
    const int n = p.n_sensors();
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const double r = residual(p, x, i, j);
            s += r * r;
        }
        if (j == 0 || s < best) best = s;
    }
    return best;
}

inline double broadcast_f_oracle(const BroadcastPolicy& p, std::span<const double> x) {
    const int n = p.n_sensors();
    double s = 0.0;
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i) {
            if (i == l) continue;
            const double r = residual(p, x, i, l);
            s += r * r;
        }
    return s;
}

// max_j of the double sum over ordered pairs (i,l), i != l, l != j.
inline double broadcast_g_oracle(const BroadcastPolicy& p, std::span<const double> x) {
    const int n = p.n_sensors();
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) {
            if (l == j) continue;
            for (int i = 0; i < n; ++i) {
                if (i == l) continue;
                const double r = residual(p, x, i, l);
                s += r * r;
            }
        }
        if (j == 0 || s > best) best = s;
    }
    return best;
}

inline double broadcast_g_mean_oracle(const BroadcastPolicy& p,
                                      const schedest::SampleMatrix& data) {
    double s = 0.0;
    for (std::int64_t k = 0; k < data.n_samples(); ++k)
        s += broadcast_g_oracle(p, data.row(k));
    return s / static_cast<double>(data.n_samples());
}

// Direct transcription of the n=2 indicator-form subgradient, with
// theta = (w21, b21, w12, b12) and x = (x1, x2):
//   -2 [ x1 r21 I(|r12| <  |r21|)
//           r21 I(|r12| <  |r21|)
//        x2 r12 I(|r12| >= |r21|)
//           r12 I(|r12| >= |r21|) ]
// where r12 = x1 - w12 x2 - b12 and r21 = x2 - w21 x1 - b21.
inline Eigen::Vector4d n2_subgradient_transcription(const Eigen::Vector4d& theta,
                                                    double x1, double x2) {
    const double w21 = theta[0], b21 = theta[1], w12 = theta[2], b12 = theta[3];
    const double r12 = x1 - w12 * x2 - b12;
    const double r21 = x2 - w21 * x1 - b21;
    const bool first = std::abs(r12) < std::abs(r21);
    Eigen::Vector4d g;
    g[0] = first ? -2.0 * x1 * r21 : 0.0;
    g[1] = first ? -2.0 * r21 : 0.0;
    g[2] = first ? 0.0 : -2.0 * x2 * r12;
    g[3] = first ? 0.0 : -2.0 * r12;
    return g;
}

}  // namespace testsup
