#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace multipair {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
// mu0 * (first eigenvector component)^2.
inline QuadratureRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k + 1 < n; ++k) {
        jacobi(k, k + 1) = offdiag[static_cast<std::size_t>(k)];
        jacobi(k + 1, k) = offdiag[static_cast<std::size_t>(k)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("quadrature: Jacobi eigendecomposition failed");
    }
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
    }
    return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    std::vector<double> offdiag;
    offdiag.reserve(static_cast<std::size_t>(n - 1));
    for (int k = 1; k < n; ++k) {
        offdiag.push_back(k / std::sqrt(4.0 * k * k - 1.0));
    }
    return detail::golub_welsch(offdiag, 2.0);
}

/// n-point Gauss-Hermite rule for the weight exp(-x^2) on (-inf, inf).
inline QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
    std::vector<double> offdiag;
    offdiag.reserve(static_cast<std::size_t>(n - 1));
    for (int k = 1; k < n; ++k) {
        offdiag.push_back(std::sqrt(0.5 * k));
    }
    return detail::golub_welsch(offdiag, std::sqrt(std::acos(-1.0)));
}

}  // namespace multipair
