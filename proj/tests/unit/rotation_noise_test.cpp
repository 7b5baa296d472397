#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "multipair/rotation_noise.hpp"
#include "support/oracles.hpp"

using multipair::apply_rotation_noise;
using multipair::NoiseChannelSpec;
using multipair::NoisyPhiEvaluator;
using multipair::SymmetricState;
using multipair::werner_weight_from_sigma;

namespace {

Eigen::MatrixXcd werner_density(double w) {
    Eigen::VectorXcd bell(4);
    bell << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    return w * (bell * bell.adjoint()) + (1.0 - w) / 4.0 * Eigen::MatrixXcd::Identity(4, 4);
}

}  // namespace

TEST_CASE("quadrature weights are normalized") {
    for (double sigma : {0.05, 0.3, 0.8}) {
        const NoiseChannelSpec spec{sigma, 24, 16, 16};
        const auto state = apply_rotation_noise(SymmetricState::phi(1), spec);
        CHECK(state.total_norm() == Catch::Approx(1.0).margin(1e-10));
        double weight_sum = 0.0;
        for (const auto& b : state.branches) weight_sum += b.weight;
        CHECK(weight_sum == Catch::Approx(1.0).margin(1e-8));
    }
    SECTION("too-coarse grids are rejected") {
        CHECK_THROWS_AS(apply_rotation_noise(SymmetricState::phi(1), {3.0, 2, 16, 16}),
                        std::invalid_argument);
    }
}

TEST_CASE("zero width is the identity channel") {
    const auto in = SymmetricState::phi(3);
    const auto out = apply_rotation_noise(in, {0.0, 24, 16, 16});
    REQUIRE(out.branches.size() == 1);
    CHECK((out.branches[0].amplitudes - in.branches[0].amplitudes).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("single-pair output is a Werner state") {
    for (double sigma : {0.05, 0.1, 0.3}) {
        const auto noisy = apply_rotation_noise(SymmetricState::phi(1), {sigma, 24, 16, 16});
        const Eigen::MatrixXcd rho = multipair::density_matrix(noisy);
        const double w = werner_weight_from_sigma(sigma);
        CHECK((rho - werner_density(w)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("small widths reproduce epsilon = 4 sigma^2") {
    for (double sigma : {0.01, 0.02}) {
        const auto noisy = apply_rotation_noise(SymmetricState::phi(1), {sigma, 24, 16, 16});
        const Eigen::MatrixXcd rho = multipair::density_matrix(noisy);
        Eigen::VectorXcd bell(4);
        bell << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
        const double fidelity = (bell.adjoint() * rho * bell)(0, 0).real();
        const double w = (4.0 * fidelity - 1.0) / 3.0;
        CHECK(1.0 - w == Catch::Approx(4.0 * sigma * sigma).epsilon(0.05));
    }
}

TEST_CASE("trace is preserved on larger states") {
    const auto noisy = apply_rotation_noise(SymmetricState::phi(3), {0.2, 24, 16, 16});
    CHECK(noisy.total_norm() == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("fused evaluator agrees with the explicit branch expansion") {
    oracles::Rng rng(23);
    for (int m : {1, 2, 3}) {
        for (double sigma : {0.1, 0.4}) {
            const NoiseChannelSpec spec{sigma, 24, 8, 8};
            const auto branchy = apply_rotation_noise(SymmetricState::phi(m), spec);
            const NoisyPhiEvaluator fused(m, spec);
            for (int trial = 0; trial < 3; ++trial) {
                const double a = rng.uniform(-1.5, 1.5);
                const double b = rng.uniform(-1.5, 1.5);
                const Eigen::MatrixXd p1 = multipair::count_distribution(branchy, a, b);
                const Eigen::MatrixXd p2 = fused.count_distribution(a, b);
                CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-10);
            }
        }
    }
}

TEST_CASE("noise only degrades correlations, not marginals") {
    const NoisyPhiEvaluator fused(4, {0.25, 24, 16, 16});
    const Eigen::MatrixXd p = fused.count_distribution(0.3, 0.5);
    CHECK(p.sum() == Catch::Approx(1.0).margin(1e-8));
    for (int k = 0; k < 5; ++k) {
        // Bob's side is untouched by the channel, so his marginal stays uniform.
        CHECK(p.col(k).sum() == Catch::Approx(0.2).margin(1e-8));
    }
}
