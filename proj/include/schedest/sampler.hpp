#pragma once

// Synthetic data generation from Gaussian mixtures and moment computation.
// Also defines the expectation backend shared by both network solvers.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "schedest/model.hpp"
#include "schedest/reduce.hpp"
#include "schedest/rng.hpp"

namespace schedest {

// Draws `count` rows from the mixture. Row k uses the RNG stream derived from
// (seed, k): one uniform selects the component by inverse CDF on the
// cumulative weights, then Box-Muller normals are pushed through the lower
// Cholesky factor. Bit-reproducible for fixed (spec, count, seed).
inline SampleMatrix sample_mixture(const GaussianMixtureSpec& spec, std::int64_t count,
                                   std::uint64_t seed) {
    if (count < 1) throw ConfigError("sample count must be positive");
    const int n = spec.dimension();
    const auto& comps = spec.components();

    std::vector<double> cumulative;
    cumulative.reserve(comps.size());
    double acc = 0.0;
    for (const auto& c : comps) cumulative.push_back(acc += c.weight);

    std::vector<Eigen::MatrixXd> chol;
    chol.reserve(comps.size());
    for (const auto& c : comps) {
        Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
        if (llt.info() != Eigen::Success)
            throw CholeskyFailureError("component covariance is not positive definite");
        chol.push_back(llt.matrixL());
    }

    std::vector<double> flat(static_cast<std::size_t>(count) * n);
    std::vector<double> z(n + 1);
    for (std::int64_t k = 0; k < count; ++k) {
        SplitMix64 rng = derive_stream(seed, static_cast<std::uint64_t>(k));
        const double u = rng.next_unit();
        std::size_t c = 0;
        while (c + 1 < cumulative.size() && u > cumulative[c]) ++c;

        for (int i = 0; i < n; i += 2) rng.next_normal_pair(z[i], z[i + 1]);
        double* row = flat.data() + k * n;
        const auto& mu = comps[c].mean;
        const auto& L = chol[c];
        for (int i = 0; i < n; ++i) {
            double v = mu[i];
            for (int j = 0; j <= i; ++j) v += L(i, j) * z[j];
            row[i] = v;
        }
    }
    return SampleMatrix(std::move(flat), n);
}

// mean = sum_k w_k mu_k;  second = sum_k w_k (Sigma_k + mu_k mu_k^T)
inline MomentSet analytic_moments(const GaussianMixtureSpec& spec) {
    const int n = spec.dimension();
    MomentSet m;
    m.mean = Eigen::VectorXd::Zero(n);
    m.second = Eigen::MatrixXd::Zero(n, n);
    for (const auto& c : spec.components()) {
        m.mean += c.weight * c.mean;
        m.second += c.weight * (c.covariance + c.mean * c.mean.transpose());
    }
    m.validate();
    return m;
}

// Column means without the nondegeneracy check; always computable.
inline Eigen::VectorXd empirical_mean(const SampleMatrix& data) {
    const int n = data.n_sensors();
    std::vector<PairwiseSum> acc(n);
    for (std::int64_t k = 0; k < data.n_samples(); ++k) {
        const auto row = data.row(k);
        for (int i = 0; i < n; ++i) acc[i].add(row[i]);
    }
    Eigen::VectorXd mean(n);
    const double inv_n = 1.0 / static_cast<double>(data.n_samples());
    for (int i = 0; i < n; ++i) mean[i] = acc[i].total() * inv_n;
    return mean;
}

// mean[i] = (1/N) sum_k x_i(k);  second[i][j] = (1/N) sum_k x_i(k) x_j(k).
// Throws DegenerateVariance when a column is constant (singular A).
inline MomentSet empirical_moments(const SampleMatrix& data) {
    const int n = data.n_sensors();
    std::vector<PairwiseSum> mean_acc(n);
    std::vector<PairwiseSum> second_acc(n * n);
    for (std::int64_t k = 0; k < data.n_samples(); ++k) {
        const auto row = data.row(k);
        for (int i = 0; i < n; ++i) {
            mean_acc[i].add(row[i]);
            for (int j = i; j < n; ++j) second_acc[i * n + j].add(row[i] * row[j]);
        }
    }
    MomentSet m;
    m.mean.resize(n);
    m.second.resize(n, n);
    const double inv_n = 1.0 / static_cast<double>(data.n_samples());
    for (int i = 0; i < n; ++i) {
        m.mean[i] = mean_acc[i].total() * inv_n;
        for (int j = i; j < n; ++j) {
            const double v = second_acc[i * n + j].total() * inv_n;
            m.second(i, j) = v;
            m.second(j, i) = v;
        }
    }
    m.validate();
    return m;
}

// Probabilistic backend for all expectation evaluations. Either wraps a user
// dataset or, for a mixture, one fixed Monte Carlo draw taken at construction.
// Expectations inside the CCP are then exact on that sample, which is what
// keeps the descent property intact. Immutable and sharable across threads.
class ExpectationBackend {
public:
    static ExpectationBackend empirical(SampleMatrix data) {
        return ExpectationBackend(std::move(data), /*monte_carlo=*/false);
    }

    // sample_count is floored at 1000: below that the moment estimates are too
    // noisy for the system matrices to mean anything.
    static ExpectationBackend monte_carlo_mixture(const GaussianMixtureSpec& spec,
                                                  std::int64_t sample_count,
                                                  std::uint64_t seed) {
        if (sample_count < 1000)
            throw ConfigError("Monte Carlo backend needs at least 1000 samples, got " +
                              std::to_string(sample_count));
        return ExpectationBackend(sample_mixture(spec, sample_count, seed),
                                  /*monte_carlo=*/true);
    }

    const SampleMatrix& data() const { return *data_; }
    int n_sensors() const { return data_->n_sensors(); }
    std::int64_t n_samples() const { return data_->n_samples(); }
    bool is_monte_carlo() const { return monte_carlo_; }

    const Eigen::VectorXd& mean() const { return mean_; }

    // Full first/second moments; throws DegenerateVariance on constant columns.
    MomentSet moments() const { return empirical_moments(*data_); }

private:
    ExpectationBackend(SampleMatrix data, bool monte_carlo)
        : data_(std::make_shared<const SampleMatrix>(std::move(data))),
          monte_carlo_(monte_carlo),
          mean_(empirical_mean(*data_)) {}

    std::shared_ptr<const SampleMatrix> data_;
    bool monte_carlo_ = false;
    Eigen::VectorXd mean_;
};

}  // namespace schedest
