#pragma once

// Core domain types shared by the sampler, unicast, broadcast and learning
// headers. No algorithms live here.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace schedest {

inline constexpr char kArtifactVersion[] = "0.1.0";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteError : Error {
    using Error::Error;
};
struct TooFewSensorsError : Error {
    using Error::Error;
};
struct EmptyDataError : Error {
    using Error::Error;
};
struct DimensionMismatchError : Error {
    using Error::Error;
};
struct DegenerateVarianceError : Error {
    using Error::Error;
};
struct CholeskyFailureError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionMismatchError(what);
}

// ---------------------------------------------------------------------------
// SampleMatrix: N x n table of sensor observations, row-major.
// ---------------------------------------------------------------------------

class SampleMatrix {
public:
    SampleMatrix() = default;

    // Validates shape and finiteness. N >= 1, n >= 2, no NaN/Inf.
    SampleMatrix(std::vector<double> data, int n_sensors)
        : data_(std::move(data)), n_sensors_(n_sensors) {
        if (n_sensors_ < 2)
            throw TooFewSensorsError("need at least 2 sensors, got " +
                                     std::to_string(n_sensors_));
        if (data_.empty() || data_.size() % static_cast<std::size_t>(n_sensors_) != 0)
            throw EmptyDataError("sample table is empty or not rectangular");
        n_samples_ = static_cast<std::int64_t>(data_.size()) / n_sensors_;
        for (double v : data_)
            if (!std::isfinite(v))
                throw NonFiniteError("sample table contains a non-finite entry");
    }

    static SampleMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw EmptyDataError("no rows");
        const std::size_t n = rows.front().size();
        std::vector<double> flat;
        flat.reserve(rows.size() * n);
        for (const auto& r : rows) {
            if (r.size() != n)
                throw EmptyDataError("ragged rows in sample table");
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return SampleMatrix(std::move(flat), static_cast<int>(n));
    }

    int n_sensors() const { return n_sensors_; }
    std::int64_t n_samples() const { return n_samples_; }

    std::span<const double> row(std::int64_t k) const {
        return {data_.data() + k * n_sensors_, static_cast<std::size_t>(n_sensors_)};
    }
    double operator()(std::int64_t k, int i) const { return data_[k * n_sensors_ + i]; }
    const std::vector<double>& raw() const { return data_; }

private:
    std::vector<double> data_;
    int n_sensors_ = 0;
    std::int64_t n_samples_ = 0;
};

// Spec'd entry point: validate a raw rectangular table.
inline SampleMatrix validate_sample_matrix(const std::vector<std::vector<double>>& raw) {
    return SampleMatrix::from_rows(raw);
}

// ---------------------------------------------------------------------------
// GaussianMixtureSpec
// ---------------------------------------------------------------------------

struct MixtureComponent {
    double weight = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

class GaussianMixtureSpec {
public:
    GaussianMixtureSpec() = default;

    explicit GaussianMixtureSpec(std::vector<MixtureComponent> components)
        : components_(std::move(components)) {
        if (components_.empty()) throw ConfigError("mixture has no components");
        const auto n = components_.front().mean.size();
        double wsum = 0.0;
        for (const auto& c : components_) {
            if (c.weight <= 0.0 || c.weight > 1.0)
                throw ConfigError("component weight outside (0,1]");
            wsum += c.weight;
            if (c.mean.size() != n || c.covariance.rows() != n || c.covariance.cols() != n)
                throw ConfigError("mixture component dimensions disagree");
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!std::isfinite(c.mean[i])) throw NonFiniteError("non-finite mean");
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (!std::isfinite(c.covariance(i, j)))
                        throw NonFiniteError("non-finite covariance");
                    if (std::abs(c.covariance(i, j) - c.covariance(j, i)) > 1e-12)
                        throw ConfigError("covariance not symmetric");
                }
            }
            Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
            if (llt.info() != Eigen::Success)
                throw CholeskyFailureError("covariance not positive definite");
        }
        if (std::abs(wsum - 1.0) > 1e-12)
            throw ConfigError("mixture weights must sum to 1");
    }

    const std::vector<MixtureComponent>& components() const { return components_; }
    int dimension() const { return static_cast<int>(components_.front().mean.size()); }

private:
    std::vector<MixtureComponent> components_;
};

// ---------------------------------------------------------------------------
// MomentSet: E[X] and the raw second-moment matrix E[Xi Xj].
// ---------------------------------------------------------------------------

struct MomentSet {
    Eigen::VectorXd mean;    // E[X]
    Eigen::MatrixXd second;  // second(i,j) = E[Xi Xj]

    int dimension() const { return static_cast<int>(mean.size()); }

    double variance(int i) const { return second(i, i) - mean[i] * mean[i]; }
    double covariance(int i, int j) const { return second(i, j) - mean[i] * mean[j]; }

    // Symmetry within 1e-9 relative, all variances strictly positive.
    void validate() const {
        const int n = dimension();
        if (second.rows() != n || second.cols() != n)
            throw DimensionMismatchError("moment matrix shape");
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double scale =
                    std::max({1.0, std::abs(second(i, j)), std::abs(second(j, i))});
                if (std::abs(second(i, j) - second(j, i)) > 1e-9 * scale)
                    throw Error("second-moment matrix not symmetric");
            }
            if (!(variance(i) > 0.0))
                throw DegenerateVarianceError("sensor " + std::to_string(i + 1) +
                                              " has non-positive variance");
        }
    }
};

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

// Erasure-case estimates for the unicast receivers, one per sensor.
struct UnicastPolicy {
    Eigen::VectorXd xhat;

    UnicastPolicy() = default;
    explicit UnicastPolicy(Eigen::VectorXd x) : xhat(std::move(x)) {
        for (Eigen::Index i = 0; i < xhat.size(); ++i)
            if (!std::isfinite(xhat[i])) throw NonFiniteError("non-finite policy entry");
    }

    int n_sensors() const { return static_cast<int>(xhat.size()); }
};

// Affine side-information estimators for the broadcast receivers.
//
// theta = vec(theta_1, ..., theta_n) where block theta_j stacks the pairs
// [w_ij; b_ij] for all i != j in increasing order of i. Block theta_j holds
// the parameters of the estimators that use X_j as side information, so for
// n = 2 the layout is (w_21, b_21, w_12, b_12).
struct BroadcastPolicy {
    Eigen::VectorXd theta;
    int n = 0;

    BroadcastPolicy() = default;
    BroadcastPolicy(Eigen::VectorXd t, int n_sensors) : theta(std::move(t)), n(n_sensors) {
        if (n < 2) throw TooFewSensorsError("broadcast policy needs n >= 2");
        if (theta.size() != dim(n))
            throw DimensionMismatchError("theta must have length 2n(n-1)");
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            if (!std::isfinite(theta[i])) throw NonFiniteError("non-finite policy entry");
    }

    static int dim(int n_sensors) { return 2 * n_sensors * (n_sensors - 1); }

    int n_sensors() const { return n; }

    // Flat position of the (w, b) pair estimating sensor i from sensor j.
    // Indices are 0-based; the pair occupies positions {idx, idx+1}.
    static int pair_index(int n_sensors, int i, int j) {
        const int block = 2 * (n_sensors - 1) * j;
        const int pos = i < j ? i : i - 1;
        return block + 2 * pos;
    }

    double weight(int i, int j) const { return theta[pair_index(n, i, j)]; }
    double bias(int i, int j) const { return theta[pair_index(n, i, j) + 1]; }

    void set_pair(int i, int j, double w, double b) {
        const int idx = pair_index(n, i, j);
        theta[idx] = w;
        theta[idx + 1] = b;
    }

    static BroadcastPolicy zero(int n_sensors) {
        return BroadcastPolicy(Eigen::VectorXd::Zero(dim(n_sensors)), n_sensors);
    }
};

// ---------------------------------------------------------------------------
// Optimization records
// ---------------------------------------------------------------------------

struct CcpTrace {
    std::vector<Eigen::VectorXd> iterates;
    std::vector<double> objective_values;
    bool converged = false;
    int iterations = 0;
    double final_step_norm = 0.0;
};

struct RiskReport {
    double j_train = 0.0;
    std::vector<double> j_test_values;
    double mean_j_test = 0.0;
    std::vector<std::pair<double, double>> exceedance;  // (epsilon, frequency)
    bool success = false;
};

}  // namespace schedest
