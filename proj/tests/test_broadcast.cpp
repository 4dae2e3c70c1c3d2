#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "support.hpp"

using namespace schedest;
using Catch::Approx;

namespace {

BroadcastPolicy theta2(double w21, double b21, double w12, double b12) {
    return BroadcastPolicy((Eigen::Vector4d() << w21, b21, w12, b12).finished(), 2);
}

// The solution reported for the reference mixture.
BroadcastPolicy theta_star() { return theta2(0.4238, 0.2151, -0.2390, 0.0624); }

MomentSet reference_moments() {
    return analytic_moments(testsup::reference_mixture());
}

}  // namespace

TEST_CASE("broadcast sample objective by hand") {
    const std::array<double, 2> ones{1.0, 1.0};
    CHECK(broadcast::sample_objective(theta2(1.0, 0.0, 1.0, 0.0), ones) == 0.0);

    const BroadcastPolicy zero = BroadcastPolicy::zero(2);
    CHECK(broadcast::sample_objective(zero, std::array<double, 2>{1.0, 0.0}) == 0.0);
    CHECK(broadcast::sample_objective(zero, std::array<double, 2>{0.0, 5.0}) == 0.0);
}

TEST_CASE("broadcast doc parts by hand") {
    const BroadcastPolicy zero = BroadcastPolicy::zero(2);
    const auto backend =
        ExpectationBackend::empirical(validate_sample_matrix({{1.0, 0.0}}));
    auto [f, g] = broadcast::doc_parts(zero, backend);
    CHECK(f == 1.0);
    CHECK(g == 1.0);
    CHECK(f - g == 0.0);
}

TEST_CASE("broadcast schedule follows the residual comparison") {
    // |x1 + 0.2390 x2 - 0.0624| >= |x2 - 0.4238 x1 - 0.2151| -> sensor 1
    CHECK(broadcast::schedule(theta_star(), std::array<double, 2>{0.5, 1.0}) == 1);
    CHECK(broadcast::schedule(BroadcastPolicy::zero(2),
                              std::array<double, 2>{0.0, 5.0}) == 2);
    // symmetric tie -> lowest index
    CHECK(broadcast::schedule(BroadcastPolicy::zero(2),
                              std::array<double, 2>{1.0, -1.0}) == 1);
}

TEST_CASE("ccp system matches the closed forms for the reference moments") {
    const auto sys = broadcast::build_ccp_system(reference_moments());
    Eigen::MatrixXd expected(4, 4);
    expected << 5.0, 1.0, 0.0, 0.0,
                1.0, 1.0, 0.0, 0.0,
                0.0, 0.0, 2.0, 0.5,
                0.0, 0.0, 0.5, 1.0;
    expected *= 2.0;
    CHECK(sys.dense().isApprox(expected, 1e-12));

    Eigen::Vector4d b_expected(2.1, 0.5, 2.1, 1.0);
    b_expected *= 2.0;
    CHECK(sys.b().isApprox(b_expected, 1e-12));

    // det of each stored block is 4 Var(X_j)
    CHECK(sys.a_blocks()[0].determinant() == Approx(16.0).epsilon(1e-12));
    CHECK(sys.a_blocks()[1].determinant() == Approx(7.0).epsilon(1e-12));
}

TEST_CASE("standard normal sensors give A = 2I and b = 0") {
    MomentSet m;
    m.mean = Eigen::Vector2d::Zero();
    m.second = Eigen::Matrix2d::Identity();
    const auto sys = broadcast::build_ccp_system(m);
    CHECK(sys.dense().isApprox(2.0 * Eigen::Matrix4d::Identity(), 1e-15));
    CHECK(sys.b().isZero(0.0));
    CHECK(broadcast::ccp_step_size(sys) == Approx(0.5));
}

TEST_CASE("n=3 b vector follows the block layout") {
    MomentSet m;
    m.mean = Eigen::Vector3d(0.1, 0.2, 0.3);
    m.second = (Eigen::Matrix3d() << 1.0, 0.4, 0.5,
                                     0.4, 1.1, 0.6,
                                     0.5, 0.6, 1.2).finished();
    const auto sys = broadcast::build_ccp_system(m);
    REQUIRE(sys.b().size() == 12);
    // block for side-information sensor 1: first [E[X2 X1]; E[X2]], then
    // [E[X3 X1]; E[X3]] (1-based labels), all times 2
    CHECK(sys.b()[0] == Approx(2.0 * 0.4));
    CHECK(sys.b()[1] == Approx(2.0 * 0.2));
    CHECK(sys.b()[2] == Approx(2.0 * 0.5));
    CHECK(sys.b()[3] == Approx(2.0 * 0.3));
}

TEST_CASE("degenerate variance is rejected when building the system") {
    MomentSet m;
    m.mean = Eigen::Vector2d(1.0, 2.0);
    m.second = (Eigen::Matrix2d() << 1.0, 2.0, 2.0, 4.0).finished();  // Var = 0
    CHECK_THROWS_AS(broadcast::build_ccp_system(m), DegenerateVarianceError);
}

TEST_CASE("broadcast sample subgradient by hand") {
    const BroadcastPolicy zero = BroadcastPolicy::zero(2);
    const Eigen::VectorXd g =
        broadcast::sample_subgradient(zero, std::array<double, 2>{3.0, 1.0});
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == -6.0);
    CHECK(g[3] == -6.0);

    // exact fit: zero residuals everywhere
    const Eigen::VectorXd g0 = broadcast::sample_subgradient(
        theta2(2.0, 1.0, 0.5, -0.5), std::array<double, 2>{1.0, 3.0});
    CHECK(g0.isZero(0.0));
}

TEST_CASE("vectorized subgradient equals the n=2 indicator transcription") {
    SplitMix64 rng(1111);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Vector4d theta = testsup::random_vector(rng, 4, -2.0, 2.0);
        const double x1 = rng.next_uniform(-4.0, 4.0);
        const double x2 = rng.next_uniform(-4.0, 4.0);
        const Eigen::VectorXd lib = broadcast::sample_subgradient(
            BroadcastPolicy(theta, 2), std::array<double, 2>{x1, x2});
        const Eigen::Vector4d ref = testsup::n2_subgradient_transcription(theta, x1, x2);
        CHECK(testsup::exactly_equal(lib, ref));
    }
}

TEST_CASE("per-sample DoC identity against the literal oracle") {
    SplitMix64 rng(2222);
    for (int n : {2, 3, 4, 5}) {
        for (int trial = 0; trial < 300; ++trial) {
            BroadcastPolicy p(testsup::random_vector(rng, BroadcastPolicy::dim(n), -2.0, 2.0), n);
            const Eigen::VectorXd x = testsup::random_vector(rng, n, -4.0, 4.0);
            const std::span<const double> xs(x.data(), static_cast<std::size_t>(n));
            const double direct = testsup::broadcast_objective_oracle(p, xs);
            const double viaparts =
                testsup::broadcast_f_oracle(p, xs) - testsup::broadcast_g_oracle(p, xs);
            const double lib = broadcast::sample_objective(p, xs);
            const double scale = std::max(1.0, std::abs(direct));
            CHECK(std::abs(direct - viaparts) <= 1e-9 * scale);
            CHECK(std::abs(direct - lib) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("backend doc parts difference equals the backend objective") {
    SplitMix64 rng(3333);
    for (int n : {2, 3, 4}) {
        const auto backend =
            ExpectationBackend::empirical(testsup::random_dataset(rng, 200, n));
        for (int trial = 0; trial < 10; ++trial) {
            BroadcastPolicy p(testsup::random_vector(rng, BroadcastPolicy::dim(n), -2.0, 2.0), n);
            auto [f, g] = broadcast::doc_parts(p, backend);
            CHECK(f - g == Approx(broadcast::objective(p, backend)).epsilon(1e-9));
        }
    }
}

TEST_CASE("subgradient inequality holds at random probes") {
    SplitMix64 rng(4444);
    const auto data = testsup::random_dataset(rng, 120, 2);
    const auto backend = ExpectationBackend::empirical(data);
    for (int trial = 0; trial < 10; ++trial) {
        BroadcastPolicy p(testsup::random_vector(rng, 4, -2.0, 2.0), 2);
        const Eigen::VectorXd g = broadcast::subgradient(p, backend);
        const double gp = testsup::broadcast_g_mean_oracle(p, data);
        for (int probe = 0; probe < 100; ++probe) {
            BroadcastPolicy z(testsup::random_vector(rng, 4, -3.0, 3.0), 2);
            const double gz = testsup::broadcast_g_mean_oracle(z, data);
            CHECK(gz >= gp + g.dot(z.theta - p.theta) - 1e-9);
        }
    }
}

TEST_CASE("zero-subgradient step solves the per-pair least squares") {
    SplitMix64 rng(5555);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 3);
        const auto data = testsup::random_dataset(rng, 100, n);
        const MomentSet m = empirical_moments(data);
        const auto sys = broadcast::build_ccp_system(m);
        const BroadcastPolicy ls =
            broadcast::ccp_step(sys, Eigen::VectorXd::Zero(sys.dimension()));
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                if (i == j) continue;
                const double w = m.covariance(i, j) / m.variance(j);
                const double b = m.mean[i] - w * m.mean[j];
                CHECK(ls.weight(i, j) == Approx(w).epsilon(1e-10).margin(1e-12));
                CHECK(ls.bias(i, j) == Approx(b).epsilon(1e-10).margin(1e-12));
            }
    }
}

TEST_CASE("diagonal system step by hand") {
    MomentSet m;
    m.mean = Eigen::Vector2d::Zero();
    m.second = Eigen::Matrix2d::Identity();
    const auto sys = broadcast::build_ccp_system(m);
    const BroadcastPolicy next =
        broadcast::ccp_step(sys, (Eigen::Vector4d() << 2.0, 0.0, 0.0, 0.0).finished());
    CHECK(next.theta[0] == 1.0);
    CHECK(next.theta[1] == 0.0);
    CHECK(next.theta[2] == 0.0);
    CHECK(next.theta[3] == 0.0);
}

TEST_CASE("ccp step equals the preconditioned subgradient update") {
    SplitMix64 rng(6666);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 3);
        const auto data = testsup::random_dataset(rng, 60, n);
        const auto sys = broadcast::build_ccp_system(empirical_moments(data));
        const int d = sys.dimension();
        const Eigen::VectorXd theta = testsup::random_vector(rng, d, -2.0, 2.0);
        const Eigen::VectorXd g = testsup::random_vector(rng, d, -3.0, 3.0);
        const Eigen::VectorXd via_ccp = broadcast::ccp_step(sys, g).theta;
        // theta - A^{-1} j with j = grad F - g and grad F = A theta - b
        const Eigen::VectorXd via_subgrad =
            theta - sys.solve(sys.apply(theta) - sys.b() - g);
        for (int i = 0; i < d; ++i)
            CHECK(via_ccp[i] == Approx(via_subgrad[i]).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("blockwise solve matches a dense solve") {
    SplitMix64 rng(7777);
    for (int n : {2, 3, 4}) {
        const auto data = testsup::random_dataset(rng, 80, n);
        const auto sys = broadcast::build_ccp_system(empirical_moments(data));
        const Eigen::MatrixXd dense = sys.dense();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
        CHECK(eig.eigenvalues().minCoeff() == Approx(sys.min_eigenvalue()).epsilon(1e-10));

        const Eigen::VectorXd rhs = testsup::random_vector(rng, sys.dimension(), -2.0, 2.0);
        const Eigen::VectorXd block = sys.solve(rhs);
        const Eigen::VectorXd full = dense.ldlt().solve(rhs);
        CHECK((block - full).norm() <= 1e-12 * full.norm());
    }
}

TEST_CASE("step size from a hand-computed block") {
    // stored block [[10,2],[2,2]]: eigenvalues 6 +- sqrt(20)
    std::vector<Eigen::Matrix2d> blocks(2);
    blocks[0] << 10.0, 2.0, 2.0, 2.0;
    blocks[1] << 10.0, 2.0, 2.0, 2.0;
    broadcast::CcpLinearSystem sys(blocks, Eigen::VectorXd::Zero(4), 2);
    const double lmin = 6.0 - std::sqrt(20.0);
    CHECK(broadcast::ccp_step_size(sys) == Approx(1.0 / lmin).epsilon(1e-12));
}

TEST_CASE("exact affine relation is recovered with zero risk") {
    SplitMix64 rng(8888);
    std::vector<double> flat;
    for (int k = 0; k < 400; ++k) {
        const double x1 = rng.next_uniform(-2.0, 2.0);
        flat.push_back(x1);
        flat.push_back(2.0 * x1 + 1.0);
    }
    const auto backend = ExpectationBackend::empirical(SampleMatrix(std::move(flat), 2));
    const BroadcastPolicy init(testsup::random_vector(rng, 4, -1.0, 1.0), 2);
    const auto [policy, trace] = broadcast::ccp(init, backend);
    REQUIRE(trace.converged);
    CHECK(broadcast::objective(policy, backend) <= 1e-9);
    CHECK(policy.theta[0] == Approx(2.0).margin(1e-5));
    CHECK(policy.theta[1] == Approx(1.0).margin(1e-5));
}

TEST_CASE("ccp trace is monotone on empirical backends") {
    SplitMix64 rng(9999);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 2);
        const auto backend =
            ExpectationBackend::empirical(testsup::random_dataset(rng, 300, n));
        const BroadcastPolicy init(
            testsup::random_vector(rng, BroadcastPolicy::dim(n), -2.0, 2.0), n);
        const auto [policy, trace] = broadcast::ccp(init, backend);
        for (std::size_t k = 1; k < trace.objective_values.size(); ++k)
            CHECK(trace.objective_values[k] <= trace.objective_values[k - 1] + 1e-9);
    }
}

TEST_CASE("multistart is deterministic across worker counts") {
    SplitMix64 rng(1212);
    const auto backend =
        ExpectationBackend::empirical(testsup::random_dataset(rng, 250, 2));
    const auto a = broadcast::run_multistart(backend, 10, 3, {}, 1);
    const auto b = broadcast::run_multistart(backend, 10, 3, {}, 4);
    CHECK(testsup::exactly_equal(a.best.theta, b.best.theta));
    CHECK(a.best_value == b.best_value);
}

TEST_CASE("fixed-point residual at the reference solution is small") {
    const auto backend =
        ExpectationBackend::monte_carlo_mixture(testsup::reference_mixture(), 1000000, 3141);
    const auto sys = broadcast::build_ccp_system(backend.moments());
    const BroadcastPolicy star = theta_star();
    const Eigen::VectorXd g = broadcast::subgradient(star, backend);
    const double resid = (sys.apply(star.theta) - sys.b() - g).norm();
    CHECK(resid <= 0.05);
}

TEST_CASE("dimension mismatches are rejected") {
    const BroadcastPolicy p = BroadcastPolicy::zero(3);
    const auto backend =
        ExpectationBackend::empirical(validate_sample_matrix({{1.0, 2.0}}));
    CHECK_THROWS_AS(broadcast::objective(p, backend), DimensionMismatchError);
}
