#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>

#include <Eigen/Dense>

#include "multipair/pair_core.hpp"

namespace multipair {

/// Angular momentum matrices for dimension dim = 2j+1. Basis index k runs
/// over 0..dim-1 and carries J_z eigenvalue m = k - j, i.e. k counts photons
/// in mode 0 of a two-mode Fock space.
struct SpinOperators {
    int dim = 0;
    double j = 0.0;
    Eigen::MatrixXcd jx, jy, jz;

    static SpinOperators make(int dim) {
        if (dim < 1) throw std::invalid_argument("SpinOperators: dim must be >= 1");
        SpinOperators ops;
        ops.dim = dim;
        ops.j = 0.5 * (dim - 1);
        Eigen::MatrixXcd jplus = Eigen::MatrixXcd::Zero(dim, dim);
        ops.jz = Eigen::MatrixXcd::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) {
            const double m = k - ops.j;
            ops.jz(k, k) = m;
            if (k + 1 < dim) {
                // J+ |j,m> = sqrt((j-m)(j+m+1)) |j,m+1>
                jplus(k + 1, k) = std::sqrt((ops.j - m) * (ops.j + m + 1.0));
            }
        }
        const std::complex<double> half(0.5, 0.0);
        const std::complex<double> halfi(0.0, -0.5);
        ops.jx = half * (jplus + jplus.adjoint());
        ops.jy = halfi * (jplus - jplus.adjoint());
        return ops;
    }
};

/// n . J for a unit axis n.
inline Eigen::MatrixXcd spin_axis_generator(int dim, const BlochVector& axis) {
    require_unit(axis, "spin_axis_generator");
    const SpinOperators ops = SpinOperators::make(dim);
    return axis.x * ops.jx + axis.y * ops.jy + axis.z * ops.jz;
}

/// exp(-i * angle * n.J), computed by diagonalizing the Hermitian generator.
inline Eigen::MatrixXcd spin_rotation(int dim, const BlochVector& axis, double angle) {
    const Eigen::MatrixXcd gen = spin_axis_generator(dim, axis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gen);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("spin_rotation: eigendecomposition failed");
    }
    const auto& vals = solver.eigenvalues();
    const Eigen::MatrixXcd& vecs = solver.eigenvectors();
    Eigen::VectorXcd phases(dim);
    for (int i = 0; i < dim; ++i) {
        phases(i) = std::polar(1.0, -angle * vals(i));
    }
    return vecs * phases.asDiagonal() * vecs.adjoint();
}

namespace detail {

struct JyEigen {
    Eigen::MatrixXcd vectors;
    Eigen::VectorXd values;
};

// One J_y eigendecomposition per dimension serves every y-rotation angle.
inline const JyEigen& jy_eigen(int dim) {
    thread_local std::map<int, JyEigen> cache;
    auto it = cache.find(dim);
    if (it == cache.end()) {
        const SpinOperators ops = SpinOperators::make(dim);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(ops.jy);
        if (solver.info() != Eigen::Success) {
            throw std::runtime_error("jy_eigen: eigendecomposition failed");
        }
        it = cache.emplace(dim, JyEigen{solver.eigenvectors(), solver.eigenvalues()}).first;
    }
    return it->second;
}

}  // namespace detail

/// Real orthogonal matrix of exp(-i * beta * J_y): the rotation applied to
/// two-mode photon amplitudes by a planar polarizer turned by beta.
inline Eigen::MatrixXd wigner_small_d(int dim, double beta) {
    const detail::JyEigen& eig = detail::jy_eigen(dim);
    Eigen::VectorXcd phases(dim);
    for (int i = 0; i < dim; ++i) phases(i) = std::polar(1.0, -beta * eig.values(i));
    const Eigen::MatrixXcd u = eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
    if (u.imag().cwiseAbs().maxCoeff() > 1e-9) {
        throw std::runtime_error("wigner_small_d: y-rotation came out non-real");
    }
    return u.real();
}

}  // namespace multipair
