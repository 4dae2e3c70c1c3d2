#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace schedest;
using testsup::reference_mixture;

TEST_CASE("SplitMix64 matches the published sequence") {
    SplitMix64 rng(0);
    CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next_u64() == 0x06c45d188009454fULL);

    SplitMix64 rng42(42);
    CHECK(rng42.next_u64() == 0xbdd732262feb6e95ULL);

    // derived stream k equals the (k+1)-th output reseeded
    CHECK(derive_seed(0, 0) == 0xe220a8397b1dcdafULL);
    CHECK(derive_seed(0, 2) == 0x06c45d188009454fULL);
}

TEST_CASE("unit draws live in (0,1]") {
    SplitMix64 rng(0);
    CHECK(rng.next_unit() == Catch::Approx(0.8833108082136427).epsilon(1e-15));
    SplitMix64 many(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = many.next_unit();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("sample_mixture is deterministic in (spec, count, seed)") {
    const auto spec = reference_mixture();
    const auto a = sample_mixture(spec, 500, 123);
    const auto b = sample_mixture(spec, 500, 123);
    REQUIRE(a.n_samples() == 500);
    CHECK(a.raw() == b.raw());
    const auto c = sample_mixture(spec, 500, 124);
    CHECK(a.raw() != c.raw());
}

TEST_CASE("near-zero covariance collapses samples onto the mean") {
    MixtureComponent c;
    c.weight = 1.0;
    c.mean = Eigen::Vector2d(5.0, 7.0);
    c.covariance = 1e-12 * Eigen::Matrix2d::Identity();
    const auto data = sample_mixture(GaussianMixtureSpec({c}), 4, 9);
    for (std::int64_t k = 0; k < data.n_samples(); ++k) {
        CHECK(std::abs(data(k, 0) - 5.0) < 1e-4);
        CHECK(std::abs(data(k, 1) - 7.0) < 1e-4);
    }
}

TEST_CASE("large-sample empirical mean approaches the mixture mean") {
    const auto data = sample_mixture(reference_mixture(), 1000000, 2024);
    const Eigen::VectorXd mean = empirical_mean(data);
    CHECK(std::abs(mean[0] - 1.0) < 0.02);
    CHECK(std::abs(mean[1] - 0.5) < 0.02);
}

TEST_CASE("analytic moments of the reference mixture") {
    const MomentSet m = analytic_moments(reference_mixture());
    CHECK(m.mean[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(m.mean[1] == Catch::Approx(0.5).margin(1e-12));
    CHECK(m.variance(0) == Catch::Approx(4.0).margin(1e-12));
    CHECK(m.variance(1) == Catch::Approx(1.75).margin(1e-12));
    CHECK(m.second(0, 1) == Catch::Approx(2.1).margin(1e-12));
    CHECK(m.covariance(0, 1) == Catch::Approx(1.6).margin(1e-12));
}

TEST_CASE("analytic second moment cross-checked by Monte Carlo",
          "[heavy]") {
    const auto data = sample_mixture(reference_mixture(), 10000000, 5150);
    PairwiseSum acc;
    for (std::int64_t k = 0; k < data.n_samples(); ++k)
        acc.add(data(k, 0) * data(k, 1));
    const double mc = acc.total() / static_cast<double>(data.n_samples());
    CHECK(std::abs(mc - 2.1) < 0.01);
}

TEST_CASE("single standard normal component has identity second moment") {
    MixtureComponent c;
    c.weight = 1.0;
    c.mean = Eigen::Vector3d::Zero();
    c.covariance = Eigen::Matrix3d::Identity();
    const MomentSet m = analytic_moments(GaussianMixtureSpec({c}));
    CHECK(m.mean.isZero(1e-15));
    CHECK(m.second.isApprox(Eigen::Matrix3d::Identity(), 1e-15));
}

TEST_CASE("empirical moments by hand on two points") {
    const auto data = validate_sample_matrix({{1.0, 2.0}, {3.0, 4.0}});
    const MomentSet m = empirical_moments(data);
    CHECK(m.mean[0] == 2.0);
    CHECK(m.mean[1] == 3.0);
    CHECK(m.second(0, 0) == 5.0);
    CHECK(m.second(0, 1) == 8.0);
    CHECK(m.second(1, 0) == 8.0);
    CHECK(m.second(1, 1) == 10.0);
}

TEST_CASE("constant column is degenerate") {
    const auto data = validate_sample_matrix({{1.0, 7.0}, {2.0, 7.0}, {3.0, 7.0}});
    CHECK_THROWS_AS(empirical_moments(data), DegenerateVarianceError);
}

TEST_CASE("empirical moments converge to analytic moments", "[heavy]") {
    const auto spec = reference_mixture();
    const MomentSet truth = analytic_moments(spec);
    const auto data = sample_mixture(spec, 1000000, 77);
    const MomentSet est = empirical_moments(data);
    const double n = static_cast<double>(data.n_samples());

    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            CHECK(std::abs(est.second(i, j) - truth.second(i, j)) < 0.02);
            // gap below 5 standard errors of the product mean
            PairwiseSum sq;
            for (std::int64_t k = 0; k < data.n_samples(); ++k) {
                const double p = data(k, i) * data(k, j) - est.second(i, j);
                sq.add(p * p);
            }
            const double se = std::sqrt(sq.total() / n / n);
            CHECK(std::abs(est.second(i, j) - truth.second(i, j)) < 5.0 * se);
        }
    for (int i = 0; i < 2; ++i)
        CHECK(std::abs(est.mean[i] - truth.mean[i]) < 0.02);
}

TEST_CASE("covariance matrix of computed moments is PSD") {
    SplitMix64 rng(4242);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 3);
        const auto data = testsup::random_dataset(rng, 200, n);
        const MomentSet m = empirical_moments(data);
        const Eigen::MatrixXd cov = m.second - m.mean * m.mean.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        CHECK(eig.eigenvalues().minCoeff() > -1e-9);
    }
}

TEST_CASE("Monte Carlo backend enforces the sample floor") {
    const auto spec = reference_mixture();
    CHECK_THROWS_AS(ExpectationBackend::monte_carlo_mixture(spec, 999, 1), ConfigError);
    const auto backend = ExpectationBackend::monte_carlo_mixture(spec, 1000, 1);
    CHECK(backend.n_samples() == 1000);
    CHECK(backend.is_monte_carlo());
    // backend data is exactly the seeded draw
    const auto direct = sample_mixture(spec, 1000, 1);
    CHECK(backend.data().raw() == direct.raw());
}
