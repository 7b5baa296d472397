#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace multipair {

inline constexpr double kUnitTolerance = 1e-9;

/// Measurement direction on the Bloch sphere. Must have unit norm.
struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 1.0;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }

    /// Direction in the x-z plane at polar angle chi from the z axis.
    static BlochVector planar(double chi) { return {std::sin(chi), 0.0, std::cos(chi)}; }
};

inline void require_unit(const BlochVector& n, const char* what) {
    if (std::abs(n.norm() - 1.0) > kUnitTolerance) {
        throw std::invalid_argument(std::string(what) + ": direction is not a unit vector");
    }
}

/// One-parameter planar family of four settings. Alice measures along the
/// z axis and at angle 2*alpha; Bob at +/- alpha. All in the x-z plane.
struct PlanarSettings {
    double alpha = 0.0;

    BlochVector a1() const { return BlochVector::planar(0.0); }
    BlochVector a2() const { return BlochVector::planar(2.0 * alpha); }
    BlochVector b1() const { return BlochVector::planar(alpha); }
    BlochVector b2() const { return BlochVector::planar(-alpha); }

    double a1_angle() const { return 0.0; }
    double a2_angle() const { return 2.0 * alpha; }
    double b1_angle() const { return alpha; }
    double b2_angle() const { return -alpha; }
};

/// Two-qubit state family: cos(theta)|00> + sin(theta)|11> mixed with white
/// noise of weight 1 - werner_w.
struct PairState {
    double theta = 0.25 * std::acos(-1.0);
    double werner_w = 1.0;

    /// Explicit 4x4 density operator in the |00>,|01>,|10>,|11> basis.
    Eigen::Matrix4cd density() const {
        if (werner_w < -1e-12 || werner_w > 1.0 + 1e-12) {
            throw std::invalid_argument("PairState: werner_w must lie in [0, 1]");
        }
        Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
        psi(0) = std::cos(theta);
        psi(3) = std::sin(theta);
        Eigen::Matrix4cd rho = werner_w * (psi * psi.adjoint());
        rho += ((1.0 - werner_w) / 4.0) * Eigen::Matrix4cd::Identity();
        return rho;
    }
};

/// Joint outcome probabilities of one pair for a fixed settings pair.
struct PairOutcomeDist {
    double pp = 0.0;
    double pm = 0.0;
    double mp = 0.0;
    double mm = 0.0;

    double plus_a() const { return pp + pm; }
    double plus_b() const { return pp + mp; }
    double sum() const { return pp + pm + mp + mm; }
};

namespace detail {

inline Eigen::Matrix2cd half_projector(const BlochVector& n, int sign) {
    using namespace std::complex_literals;
    Eigen::Matrix2cd ns;
    ns << n.z, n.x - 1i * n.y, n.x + 1i * n.y, -n.z;
    return 0.5 * (Eigen::Matrix2cd::Identity() + static_cast<double>(sign) * ns);
}

}  // namespace detail

/// Outcome probabilities p_ab = tr[rho (P_a x P_b)] with P_+- = (1 +- n.sigma)/2.
inline PairOutcomeDist single_pair_probs(const PairState& state, const BlochVector& a,
                                         const BlochVector& b) {
    require_unit(a, "single_pair_probs");
    require_unit(b, "single_pair_probs");
    const Eigen::Matrix4cd rho = state.density();

    PairOutcomeDist dist;
    double* slots[2][2] = {{&dist.pp, &dist.pm}, {&dist.mp, &dist.mm}};
    for (int ia = 0; ia < 2; ++ia) {
        const Eigen::Matrix2cd pa = detail::half_projector(a, ia == 0 ? +1 : -1);
        for (int ib = 0; ib < 2; ++ib) {
            const Eigen::Matrix2cd pb = detail::half_projector(b, ib == 0 ? +1 : -1);
            Eigen::Matrix4cd proj;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) proj.block<2, 2>(2 * r, 2 * c) = pa(r, c) * pb;
            // Round-off can leave a projector expectation barely outside [0, 1].
            *slots[ia][ib] = std::clamp((rho * proj).trace().real(), 0.0, 1.0);
        }
    }
    return dist;
}

}  // namespace multipair
