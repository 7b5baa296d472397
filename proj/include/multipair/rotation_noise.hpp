#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "multipair/quadrature.hpp"
#include "multipair/symmetric_fock.hpp"

namespace multipair {

/// Rotation-noise channel on Alice's side: an SU(2) rotation by angle 2*beta
/// about a Haar-random axis, with beta drawn from a normalized Gaussian of
/// width sigma. Evaluated on a product quadrature grid.
struct NoiseChannelSpec {
    double sigma = 0.0;
    int n_beta = 24;
    int n_theta = 16;
    int n_phi = 16;

    void validate() const {
        if (sigma < 0.0) throw std::invalid_argument("NoiseChannelSpec: sigma must be >= 0");
        if (n_beta < 2 || n_theta < 2 || n_phi < 2) {
            throw std::invalid_argument("NoiseChannelSpec: quadrature orders must be >= 2");
        }
    }
};

/// Werner weight reproduced by the channel on a single pair:
/// 3w = exp(-2 sigma^2) + exp(-4 sigma^2) + exp(-6 sigma^2).
inline double werner_weight_from_sigma(double sigma) {
    const double s2 = sigma * sigma;
    return (std::exp(-2.0 * s2) + std::exp(-4.0 * s2) + std::exp(-6.0 * s2)) / 3.0;
}

inline double noise_fraction_from_sigma(double sigma) {
    return 1.0 - werner_weight_from_sigma(sigma);
}

namespace detail {

struct NoiseNodes {
    struct Angle {
        double omega;  // rotation angle, twice the Gaussian variable
        double weight;
    };
    struct Axis {
        double theta;
        double phi;
        double weight;
    };
    std::vector<Angle> angles;
    std::vector<Axis> axes;
};

/// Quadrature nodes for the angle and axis integrals. The angle weights fold
/// in the Haar sin^2(beta) factor and the truncation-normalized Gaussian, so
/// all weights together sum to one.
inline NoiseNodes make_noise_nodes(const NoiseChannelSpec& spec) {
    spec.validate();
    NoiseNodes nodes;

    if (spec.sigma < 1e-12) {
        nodes.angles.push_back({0.0, 1.0});
    } else {
        const double sigma = spec.sigma;
        // beta = sqrt(2) sigma t against the Gauss-Hermite weight exp(-t^2);
        // normalization 2 / (1 - exp(-2 sigma^2)) keeps the total at one.
        const QuadratureRule gh = gauss_hermite(spec.n_beta);
        const double norm = 2.0 / (-std::expm1(-2.0 * sigma * sigma));
        const double inv_sqrt_pi = 1.0 / std::sqrt(std::acos(-1.0));
        double total = 0.0;
        for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
            const double beta = std::sqrt(2.0) * sigma * gh.nodes[i];
            const double s = std::sin(beta);
            const double w = norm * inv_sqrt_pi * gh.weights[i] * s * s;
            nodes.angles.push_back({2.0 * beta, w});
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-8) {
            throw std::invalid_argument(
                "NoiseChannelSpec: angle quadrature too coarse, weights sum to " +
                std::to_string(total));
        }
    }

    // Axis average: Gauss-Legendre in cos(theta), uniform periodic grid in phi.
    const QuadratureRule gl = gauss_legendre(spec.n_theta);
    const double pi = std::acos(-1.0);
    for (std::size_t iu = 0; iu < gl.nodes.size(); ++iu) {
        const double theta = std::acos(gl.nodes[iu]);
        const double w_theta = 0.5 * gl.weights[iu];
        for (int ip = 0; ip < spec.n_phi; ++ip) {
            nodes.axes.push_back({theta, 2.0 * pi * ip / spec.n_phi, w_theta / spec.n_phi});
        }
    }
    return nodes;
}

/// Rz(phi) d(theta): maps the z axis onto the axis (theta, phi).
inline Eigen::MatrixXcd axis_frame(int dim, double theta, double phi) {
    const Eigen::MatrixXd d = wigner_small_d(dim, theta);
    Eigen::MatrixXcd frame(dim, dim);
    const double j = 0.5 * (dim - 1);
    for (int k = 0; k < dim; ++k) {
        const std::complex<double> row_phase = std::polar(1.0, -phi * (k - j));
        for (int l = 0; l < dim; ++l) frame(k, l) = row_phase * d(k, l);
    }
    return frame;
}

}  // namespace detail

/// Expand the channel into explicit branches (quadrature weight, U X) per
/// node. Branch count is the full quadrature grid size per input branch.
inline SymmetricState apply_rotation_noise(const SymmetricState& state,
                                           const NoiseChannelSpec& spec) {
    spec.validate();
    if (spec.sigma < 1e-12) return state;
    const detail::NoiseNodes nodes = detail::make_noise_nodes(spec);
    const int n = state.dim();
    const double j = 0.5 * (n - 1);

    SymmetricState out;
    out.source_pairs = state.source_pairs;
    out.branches.reserve(state.branches.size() * nodes.axes.size() * nodes.angles.size());
    for (const auto& axis : nodes.axes) {
        const Eigen::MatrixXcd frame = detail::axis_frame(n, axis.theta, axis.phi);
        for (const auto& angle : nodes.angles) {
            Eigen::VectorXcd phases(n);
            for (int k = 0; k < n; ++k) phases(k) = std::polar(1.0, -angle.omega * (k - j));
            const Eigen::MatrixXcd u = frame * phases.asDiagonal() * frame.adjoint();
            for (const auto& b : state.branches) {
                SymmetricState::Branch nb;
                nb.weight = b.weight * axis.weight * angle.weight;
                nb.amplitudes = u * b.amplitudes;
                out.branches.push_back(std::move(nb));
            }
        }
    }
    const double norm = out.total_norm();
    if (std::abs(norm - 1.0) > 1e-8) {
        throw std::invalid_argument("apply_rotation_noise: quadrature too coarse, norm " +
                                    std::to_string(norm));
    }
    return out;
}

namespace detail {

/// Angle integral of the channel against cos(2 beta delta), in closed form:
/// sin^2(beta) cos(2 delta beta) averaged over the truncated Gaussian. Exact
/// for every sigma, unlike a fixed Hermite grid.
inline double angle_kernel(double sigma, int delta) {
    if (sigma < 1e-12) return 1.0;
    const double s2 = sigma * sigma;
    auto g = [&](int k) { return std::exp(-2.0 * k * k * s2); };
    const double norm = -std::expm1(-2.0 * s2);
    return (2.0 / norm) * (0.5 * g(delta) - 0.25 * g(delta + 1) - 0.25 * g(delta - 1));
}

}  // namespace detail

/// Count statistics of the noisy 2M-photon state without materializing the
/// branch expansion. The angle integral collapses to an analytic kernel on
/// J_z index differences, leaving one axis loop; results match
/// apply_rotation_noise + count_distribution up to the latter's beta grid.
class NoisyPhiEvaluator {
public:
    NoisyPhiEvaluator(int pairs, const NoiseChannelSpec& spec) : n_(pairs + 1) {
        if (pairs < 1) throw std::invalid_argument("NoisyPhiEvaluator: pairs must be >= 1");
        spec.validate();
        const detail::NoiseNodes nodes = detail::make_noise_nodes(spec);
        gamma_ = Eigen::MatrixXcd::Zero(n_, n_);
        for (int m = 0; m < n_; ++m) {
            for (int mp = 0; mp < n_; ++mp) {
                gamma_(m, mp) = detail::angle_kernel(spec.sigma, m - mp);
            }
        }
        axis_frames_.reserve(nodes.axes.size());
        axis_weights_.reserve(nodes.axes.size());
        for (const auto& axis : nodes.axes) {
            axis_frames_.push_back(detail::axis_frame(n_, axis.theta, axis.phi));
            axis_weights_.push_back(axis.weight);
        }
    }

    Eigen::MatrixXd count_distribution(double angle_a, double angle_b) const {
        const Eigen::MatrixXd da = wigner_small_d(n_, -angle_a);
        const Eigen::MatrixXd dbt = wigner_small_d(n_, -angle_b).transpose();
        Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n_, n_);
        Eigen::VectorXcd v(n_);
        for (std::size_t x = 0; x < axis_frames_.size(); ++x) {
            const Eigen::MatrixXcd& frame = axis_frames_[x];
            const Eigen::MatrixXcd left = da * frame;              // d(-a) A
            const Eigen::MatrixXcd right = frame.adjoint() * dbt;  // A^dag d(-b)^T
            const double w = axis_weights_[x] / n_;
            for (int k = 0; k < n_; ++k) {
                for (int l = 0; l < n_; ++l) {
                    for (int m = 0; m < n_; ++m) v(m) = left(k, m) * right(m, l);
                    probs(k, l) += w * v.dot(gamma_ * v).real();
                }
            }
        }
        return probs;
    }

    ChInputs vote_probs(double angle_a, double angle_b, const VoteRule& rule) const {
        return vote_from_count_matrix(count_distribution(angle_a, angle_b), rule);
    }

    static ChInputs vote_from_count_matrix(const Eigen::MatrixXd& probs, const VoteRule& rule) {
        const int n = static_cast<int>(probs.rows());
        const int threshold = rule.threshold(n - 1);
        detail::KahanSum pa, pb, pab;
        for (int k = 0; k < n; ++k) {
            for (int l = 0; l < n; ++l) {
                if (k >= threshold) pa.add(probs(k, l));
                if (l >= threshold) pb.add(probs(k, l));
                if (k >= threshold && l >= threshold) pab.add(probs(k, l));
            }
        }
        ChInputs in{pa.sum, pb.sum, pab.sum};
        in.validate();
        return in;
    }

private:
    int n_;
    Eigen::MatrixXcd gamma_;
    std::vector<Eigen::MatrixXcd> axis_frames_;
    std::vector<double> axis_weights_;
};

}  // namespace multipair
