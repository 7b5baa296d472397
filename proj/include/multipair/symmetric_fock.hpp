#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "multipair/spin.hpp"
#include "multipair/vote_tally.hpp"

namespace multipair {

/// Bipartite state of two (m+1)-dimensional two-mode Fock spaces, stored as a
/// mixture of pure branches. A pure branch with amplitude matrix X is the
/// state sum_{k,l} X[k,l] |k, m-k>_A |l, m-l>_B where k counts photons in
/// mode 0. Weighted branch norms sum to one.
struct SymmetricState {
    struct Branch {
        double weight = 1.0;
        Eigen::MatrixXcd amplitudes;
    };

    int source_pairs = 0;
    std::vector<Branch> branches;

    int dim() const {
        if (branches.empty()) throw std::logic_error("SymmetricState: no branches");
        return static_cast<int>(branches.front().amplitudes.rows());
    }
    /// Photons reaching each party.
    int photons_per_side() const { return dim() - 1; }

    double total_norm() const {
        double s = 0.0;
        for (const auto& b : branches) s += b.weight * b.amplitudes.squaredNorm();
        return s;
    }

    bool is_pure() const { return branches.size() == 1; }

    /// The 2M-photon state with uniform Schmidt amplitudes over the M+1
    /// double-sided photon-number terms.
    static SymmetricState phi(int pairs) {
        if (pairs < 1) throw std::invalid_argument("SymmetricState::phi: pairs must be >= 1");
        SymmetricState state;
        state.source_pairs = pairs;
        Branch b;
        b.weight = 1.0;
        b.amplitudes =
            Eigen::MatrixXcd::Identity(pairs + 1, pairs + 1) / std::sqrt(pairs + 1.0);
        state.branches.push_back(std::move(b));
        return state;
    }
};

/// Full density operator sum_b w_b |x_b><x_b| with |x_b> = vec(X_b) in the
/// |k>_A|l>_B product basis (row-major). Intended for small dimensions.
inline Eigen::MatrixXcd density_matrix(const SymmetricState& state) {
    const int n = state.dim();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n * n, n * n);
    for (const auto& b : state.branches) {
        Eigen::VectorXcd v(n * n);
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) v(k * n + l) = b.amplitudes(k, l);
        rho += b.weight * (v * v.adjoint());
    }
    return rho;
}

/// Joint photon-count probabilities P[k, l] when Alice's polarizer sits at
/// planar angle a and Bob's at b. Measurement rotations act by left and right
/// multiplication on each branch's amplitude matrix.
inline Eigen::MatrixXd count_distribution(const SymmetricState& state, double angle_a,
                                          double angle_b) {
    const int n = state.dim();
    const Eigen::MatrixXd ra = wigner_small_d(n, -angle_a);
    const Eigen::MatrixXd rbt = wigner_small_d(n, -angle_b).transpose();
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, n);
    for (const auto& b : state.branches) {
        if (b.amplitudes.rows() != n || b.amplitudes.cols() != n) {
            throw std::invalid_argument("count_distribution: branch dimension mismatch");
        }
        const Eigen::MatrixXcd rotated = ra * b.amplitudes * rbt;
        probs += b.weight * rotated.cwiseAbs2();
    }
    return probs;
}

/// CH inputs after vote binarization of the photon counts; each party applies
/// its threshold to the photons it received.
inline ChInputs vote_probs_symmetric(const SymmetricState& state, double angle_a, double angle_b,
                                     const VoteRule& rule) {
    const Eigen::MatrixXd probs = count_distribution(state, angle_a, angle_b);
    const int n = static_cast<int>(probs.rows());
    const int threshold = rule.threshold(n - 1);
    ChInputs in;
    detail::KahanSum pa, pb, pab;
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
            const double p = probs(k, l);
            if (k >= threshold) pa.add(p);
            if (l >= threshold) pb.add(p);
            if (k >= threshold && l >= threshold) pab.add(p);
        }
    }
    in.p_plus_a = pa.sum;
    in.p_plus_b = pb.sum;
    in.p_joint = pab.sum;
    in.validate();
    return in;
}

/// State conditioned on losing exactly one photon on each side: one mode
/// annihilation per party, summed over the four mode pairs and globally
/// normalized. Output matrices act on one photon fewer per side.
inline SymmetricState apply_one_loss_each_side(const SymmetricState& state) {
    if (!state.is_pure()) {
        throw std::invalid_argument("apply_one_loss_each_side: input must be pure");
    }
    const int photons = state.photons_per_side();
    if (photons < 2) {
        throw std::invalid_argument("apply_one_loss_each_side: needs at least 2 photons per side");
    }
    const int n = state.dim();
    const Eigen::MatrixXcd& x = state.branches.front().amplitudes;

    // Annihilation in the |i, photons-i> basis: mode 0 takes sqrt(i) from
    // index i+1, mode 1 takes sqrt(photons-i) at index i.
    Eigen::MatrixXcd a0 = Eigen::MatrixXcd::Zero(n - 1, n);
    Eigen::MatrixXcd a1 = Eigen::MatrixXcd::Zero(n - 1, n);
    for (int i = 0; i < n - 1; ++i) {
        a0(i, i + 1) = std::sqrt(i + 1.0);
        a1(i, i) = std::sqrt(static_cast<double>(photons - i));
    }

    std::vector<Eigen::MatrixXcd> lowered;
    for (const auto& op_a : {a0, a1}) {
        for (const auto& op_b : {a0, a1}) {
            lowered.push_back(op_a * x * op_b.transpose());
        }
    }
    double total = 0.0;
    for (const auto& y : lowered) total += y.squaredNorm();
    if (total <= 0.0) throw std::logic_error("apply_one_loss_each_side: vanishing state");

    SymmetricState out;
    out.source_pairs = state.source_pairs;
    for (auto& y : lowered) {
        const double norm2 = y.squaredNorm();
        if (norm2 <= 0.0) continue;
        SymmetricState::Branch b;
        b.weight = norm2 / total;
        b.amplitudes = y / std::sqrt(norm2);
        out.branches.push_back(std::move(b));
    }
    return out;
}

}  // namespace multipair
