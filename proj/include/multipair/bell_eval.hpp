#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "multipair/pair_core.hpp"
#include "multipair/parallel.hpp"
#include "multipair/rotation_noise.hpp"
#include "multipair/symmetric_fock.hpp"
#include "multipair/vote_tally.hpp"

namespace multipair {

/// CH values above this count as a violation; guards enumeration round-off.
inline constexpr double kViolationThreshold = 1e-9;

/// Largest value the CH combination can reach here.
inline constexpr double kChCeiling = 0.25;

/// Four measurement angles in the x-z plane: Alice's two and Bob's two.
struct SettingsAngles {
    double a1 = 0.0;
    double a2 = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;

    static SettingsAngles from_planar(double alpha) {
        const PlanarSettings s{alpha};
        return {s.a1_angle(), s.a2_angle(), s.b1_angle(), s.b2_angle()};
    }
    SettingsAngles swapped_parties() const { return {b1, b2, a1, a2}; }
};

/// CH inputs for the four settings pairs (A_i, B_j).
struct ChInputsQuad {
    ChInputs s11, s12, s21, s22;
};

/// CH = -P+A(A1) - P+B(B1) + P++(A1,B1) + P++(A1,B2) + P++(A2,B1) - P++(A2,B2).
/// Local models stay at or below zero.
inline double ch_value(const ChInputsQuad& q) {
    return -q.s11.p_plus_a - q.s11.p_plus_b + q.s11.p_joint + q.s12.p_joint + q.s21.p_joint -
           q.s22.p_joint;
}

/// S = (CH + B) / B with B = P+A(A2) + P+B(B2).
inline double reid_s(const ChInputsQuad& q) {
    const double b = q.s21.p_plus_a + q.s12.p_plus_b;
    if (b <= 0.0) throw std::domain_error("reid_s: normalization B vanishes");
    return (ch_value(q) + b) / b;
}

/// A full experiment configuration. Only combinations with defined semantics
/// validate; everything else is rejected rather than extrapolated.
struct Scenario {
    enum class SourceKind { fixed, poisson };
    enum class Particles { independent, symmetric };
    enum class DetectionKind { lossless, efficiency, one_loss_each_side };
    enum class NoiseKind { none, werner, rotation };

    SourceKind source = SourceKind::fixed;
    int pairs = 1;                  // fixed source
    double mu = 1.0;                // poisson source mean
    double truncation_tail = 1e-10; // poisson truncation tolerance

    Particles particles = Particles::independent;

    DetectionKind detection = DetectionKind::lossless;
    double eta = 1.0;

    VoteRule rule = VoteRule::majority();
    EmptyEventPolicy empty_event = EmptyEventPolicy::vote_minus;

    NoiseKind noise = NoiseKind::none;
    double epsilon = 0.0;           // werner white-noise fraction
    double sigma = 0.0;             // rotation-noise width
    NoiseChannelSpec channel{0.0, 24, 16, 16};

    void validate() const {
        if (source == SourceKind::fixed && pairs < 1) {
            throw std::invalid_argument("Scenario: fixed source needs pairs >= 1");
        }
        if (source == SourceKind::poisson &&
            (mu <= 0.0 || truncation_tail <= 0.0 || truncation_tail >= 1.0)) {
            throw std::invalid_argument("Scenario: poisson source needs mu > 0 and a tail in (0,1)");
        }
        if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("Scenario: eta out of [0, 1]");
        if (epsilon < 0.0 || epsilon > 1.0) {
            throw std::invalid_argument("Scenario: epsilon out of [0, 1]");
        }
        if (sigma < 0.0) throw std::invalid_argument("Scenario: sigma must be >= 0");

        if (particles == Particles::independent) {
            if (noise == NoiseKind::rotation) {
                throw std::invalid_argument(
                    "Scenario: rotation noise is defined for the symmetric source only");
            }
            if (source == SourceKind::poisson) {
                if (detection != DetectionKind::lossless) {
                    throw std::invalid_argument(
                        "Scenario: the poisson source is analyzed with perfect detection only");
                }
                if (rule.is_ternary()) {
                    throw std::invalid_argument(
                        "Scenario: ternary voting is not defined for the poisson source");
                }
            }
            if (detection == DetectionKind::efficiency && rule.is_ternary()) {
                throw std::invalid_argument(
                    "Scenario: ternary voting with partial detection is not defined");
            }
            if (detection == DetectionKind::one_loss_each_side) {
                if (source != SourceKind::fixed || pairs < 2) {
                    throw std::invalid_argument(
                        "Scenario: one-loss-each-side needs a fixed source with pairs >= 2");
                }
                if (noise != NoiseKind::none) {
                    throw std::invalid_argument(
                        "Scenario: the loss study is defined for noiseless sources only");
                }
            }
        } else {
            if (source != SourceKind::fixed) {
                throw std::invalid_argument("Scenario: symmetric source requires fixed pair count");
            }
            if (rule.is_ternary()) {
                throw std::invalid_argument("Scenario: ternary voting applies to independent pairs");
            }
            if (noise == NoiseKind::werner) {
                throw std::invalid_argument(
                    "Scenario: werner noise applies to independent pairs; use rotation noise");
            }
            if (detection == DetectionKind::efficiency) {
                throw std::invalid_argument(
                    "Scenario: finite efficiency is analyzed for independent pairs only");
            }
            if (detection == DetectionKind::one_loss_each_side) {
                if (pairs < 2) {
                    throw std::invalid_argument("Scenario: symmetric loss needs pairs >= 2");
                }
                if (noise != NoiseKind::none) {
                    throw std::invalid_argument(
                        "Scenario: symmetric loss is analyzed without channel noise");
                }
            }
        }
    }
};

/// Poisson mixture of per-pair-count CH inputs: sum_M p(M) inputs(M), with
/// the M = 0 event resolved by the empty-event policy. per_count(M) is called
/// for M >= 1 up to the truncation point.
template <class F>
ChInputs poisson_mix(double mu, double tail_tol, F&& per_count,
                     EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    if (mu <= 0.0) throw std::invalid_argument("poisson_mix: mu must be > 0");
    static constexpr int kMaxTerms = 500;
    ChInputs total{0.0, 0.0, 0.0};
    const double empty = policy == EmptyEventPolicy::vote_plus ? 1.0 : 0.0;
    double cumulative = 0.0;
    for (int m = 0; m <= kMaxTerms; ++m) {
        const double w = std::exp(-mu + m * std::log(mu) - std::lgamma(m + 1.0));
        if (m == 0) {
            total.p_plus_a += w * empty;
            total.p_plus_b += w * empty;
            total.p_joint += w * empty;
        } else {
            const ChInputs in = per_count(m);
            total.p_plus_a += w * in.p_plus_a;
            total.p_plus_b += w * in.p_plus_b;
            total.p_joint += w * in.p_joint;
        }
        cumulative += w;
        if (1.0 - cumulative < tail_tol) {
            total.validate();
            return total;
        }
    }
    throw std::invalid_argument("poisson_mix: truncation tail above tolerance at 500 terms");
}

/// Evaluates the CH inputs of a scenario at given settings. Construction
/// pays any state-dependent setup (noise quadrature frames); evaluations
/// afterwards are pure and reentrant.
class ScenarioEvaluator {
public:
    explicit ScenarioEvaluator(Scenario sc) : sc_(std::move(sc)) {
        sc_.validate();
        if (sc_.particles == Scenario::Particles::symmetric) {
            if (sc_.detection == Scenario::DetectionKind::one_loss_each_side) {
                state_ = apply_one_loss_each_side(SymmetricState::phi(sc_.pairs));
            } else if (sc_.noise == Scenario::NoiseKind::rotation && sc_.sigma > 0.0) {
                NoiseChannelSpec spec = sc_.channel;
                spec.sigma = sc_.sigma;
                noisy_ = std::make_shared<NoisyPhiEvaluator>(sc_.pairs, spec);
            } else {
                state_ = SymmetricState::phi(sc_.pairs);
            }
        }
    }

    const Scenario& scenario() const { return sc_; }

    ChInputsQuad inputs(const SettingsAngles& ang, double theta) const {
        ChInputsQuad quad;
        quad.s11 = pair_inputs(ang.a1, ang.b1, theta);
        quad.s12 = pair_inputs(ang.a1, ang.b2, theta);
        quad.s21 = pair_inputs(ang.a2, ang.b1, theta);
        quad.s22 = pair_inputs(ang.a2, ang.b2, theta);
        return quad;
    }

    double ch(const SettingsAngles& ang, double theta) const { return ch_value(inputs(ang, theta)); }
    double ch(double alpha, double theta) const {
        return ch(SettingsAngles::from_planar(alpha), theta);
    }

private:
    ChInputs pair_inputs(double angle_a, double angle_b, double theta) const {
        if (sc_.particles == Scenario::Particles::symmetric) {
            if (noisy_) return noisy_->vote_probs(angle_a, angle_b, sc_.rule);
            return vote_probs_symmetric(*state_, angle_a, angle_b, sc_.rule);
        }

        const double w = sc_.noise == Scenario::NoiseKind::werner ? 1.0 - sc_.epsilon : 1.0;
        const PairState st{theta, w};
        const PairOutcomeDist dist =
            single_pair_probs(st, BlochVector::planar(angle_a), BlochVector::planar(angle_b));

        switch (sc_.detection) {
            case Scenario::DetectionKind::lossless:
                if (sc_.source == Scenario::SourceKind::poisson) {
                    return poisson_mix(
                        sc_.mu, sc_.truncation_tail,
                        [&](int m) { return lossless_vote_inputs(m, dist, sc_.rule, sc_.empty_event); },
                        sc_.empty_event);
                }
                if (sc_.rule.is_ternary()) {
                    return ternary_vote_probs(lossless_count_distribution(sc_.pairs, dist),
                                              sc_.rule.threshold(sc_.pairs));
                }
                return lossless_vote_inputs(sc_.pairs, dist, sc_.rule, sc_.empty_event);
            case Scenario::DetectionKind::efficiency:
                return vote_probs_with_efficiency(sc_.pairs, dist, DetectionModel{sc_.eta},
                                                  sc_.rule, sc_.empty_event);
            case Scenario::DetectionKind::one_loss_each_side: {
                const CountJointDistribution counts =
                    one_loss_each_side_distribution(sc_.pairs, dist);
                if (sc_.rule.is_ternary()) return ternary_vote_probs(counts, sc_.pairs - 1);
                return binary_vote_probs(counts, sc_.rule, sc_.empty_event);
            }
        }
        throw std::logic_error("ScenarioEvaluator: bad detection kind");
    }

    Scenario sc_;
    std::optional<SymmetricState> state_;
    std::shared_ptr<const NoisyPhiEvaluator> noisy_;
};

struct OptimizerSpec {
    int grid_points = 64;          // per dimension
    double refine_tol = 1e-7;      // parameter resolution of the refinement
    bool optimize_theta = true;    // sweep theta as well as alpha
    double alpha_max = 0.5 * std::acos(-1.0);
    double theta_max = 0.25 * std::acos(-1.0);
    int max_refine_rounds = 40;
    int workers = 1;

    void validate() const {
        if (grid_points < 2) throw std::invalid_argument("OptimizerSpec: grid_points must be >= 2");
        if (refine_tol <= 0.0) throw std::invalid_argument("OptimizerSpec: refine_tol must be > 0");
    }
};

struct ChOptimum {
    double ch = 0.0;
    double alpha = 0.0;
    double theta = 0.0;
    int grid_index = -1;
    int refine_steps = 0;

    bool violates() const { return ch > kViolationThreshold; }
};

namespace detail {

/// Golden-section maximum of f on [lo, hi]; returns argmax and adds the
/// number of shrink steps to *steps.
template <class F>
double golden_max(F&& f, double lo, double hi, double tol, int* steps) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
        if (steps) ++*steps;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Best CH over the planar settings family (and optionally the state angle):
/// a coarse deterministic grid on alpha in (0, alpha_max] x theta in
/// (0, theta_max], refined around the best cell by golden-section descent.
inline ChOptimum maximize_ch(const ScenarioEvaluator& eval, const OptimizerSpec& opt) {
    opt.validate();
    const bool with_theta =
        opt.optimize_theta && eval.scenario().particles == Scenario::Particles::independent;
    const double pi = std::acos(-1.0);
    const int ga = opt.grid_points;

    std::vector<double> alphas(static_cast<std::size_t>(ga));
    for (int i = 0; i < ga; ++i) alphas[static_cast<std::size_t>(i)] = (i + 1) * opt.alpha_max / ga;

    // Theta grid: quadratic clustering toward both weakly entangled ends.
    // The two orientations theta and pi/2 - theta are not interchangeable
    // because the vote singles out the "+" outcome.
    std::vector<double> thetas;
    if (with_theta) {
        const int gt = opt.grid_points;
        for (int i = 0; i < gt; ++i) {
            const double u = static_cast<double>(i + 1) / gt;
            thetas.push_back(opt.theta_max * u * u);
        }
        for (int i = 0; i < gt - 1; ++i) {
            const double u = static_cast<double>(i + 1) / gt;
            thetas.push_back(0.5 * pi - opt.theta_max * u * u);
        }
        std::sort(thetas.begin(), thetas.end());
    } else {
        thetas.push_back(0.25 * pi);
    }
    const int gt = static_cast<int>(thetas.size());

    std::vector<double> values(static_cast<std::size_t>(ga) * gt);
    parallel_for(
        ga * gt,
        [&](int idx) {
            values[static_cast<std::size_t>(idx)] =
                eval.ch(alphas[static_cast<std::size_t>(idx % ga)],
                        thetas[static_cast<std::size_t>(idx / ga)]);
        },
        opt.workers);

    int best = 0;
    for (int idx = 1; idx < ga * gt; ++idx) {
        if (values[static_cast<std::size_t>(idx)] > values[static_cast<std::size_t>(best)]) {
            best = idx;
        }
    }

    const int best_a = best % ga;
    const int best_t = best / ga;
    double alpha = alphas[static_cast<std::size_t>(best_a)];
    double theta = thetas[static_cast<std::size_t>(best_t)];
    const double alpha_step = opt.alpha_max / ga;
    const double theta_floor = 1e-12;
    const double theta_ceil = with_theta ? 0.5 * pi - 1e-12 : theta;
    // Bracket theta by its grid neighbors; the grid is non-uniform.
    const double theta_step =
        with_theta
            ? std::max(thetas[static_cast<std::size_t>(std::min(best_t + 1, gt - 1))] -
                           thetas[static_cast<std::size_t>(std::max(best_t - 1, 0))],
                       opt.theta_max / (gt * gt))
            : 0.0;

    int steps = 0;
    double alpha_lo = std::max(alpha - alpha_step, 1e-12);
    double alpha_hi = std::min(alpha + alpha_step, opt.alpha_max);
    double theta_lo = with_theta ? std::max(theta - theta_step, theta_floor) : theta;
    double theta_hi = with_theta ? std::min(theta + theta_step, theta_ceil) : theta;

    for (int round = 0; round < opt.max_refine_rounds; ++round) {
        const double prev_alpha = alpha;
        const double prev_theta = theta;
        alpha = detail::golden_max([&](double a) { return eval.ch(a, theta); }, alpha_lo, alpha_hi,
                                   opt.refine_tol, &steps);
        if (with_theta) {
            theta = detail::golden_max([&](double t) { return eval.ch(alpha, t); }, theta_lo,
                                       theta_hi, opt.refine_tol, &steps);
        }
        if (std::abs(alpha - prev_alpha) < opt.refine_tol &&
            (!with_theta || std::abs(theta - prev_theta) < opt.refine_tol)) {
            break;
        }
        // Recenter the brackets on the current best point.
        alpha_lo = std::max(alpha - alpha_step, 1e-12);
        alpha_hi = std::min(alpha + alpha_step, opt.alpha_max);
        if (with_theta) {
            theta_lo = std::max(theta - theta_step, theta_floor);
            theta_hi = std::min(theta + theta_step, theta_ceil);
        }
        if (!with_theta) break;
    }

    ChOptimum result{eval.ch(alpha, theta), alpha, theta, best, steps};
    if (result.ch > kChCeiling + 1e-9) {
        throw std::logic_error("maximize_ch: CH exceeded its algebraic ceiling");
    }
    return result;
}

inline ChOptimum maximize_ch(const Scenario& sc, const OptimizerSpec& opt) {
    return maximize_ch(ScenarioEvaluator(sc), opt);
}

struct FourAngleOptimum {
    double ch = 0.0;
    SettingsAngles angles;
    double theta = 0.0;

    bool violates() const { return ch > kViolationThreshold; }
};

/// Coordinate descent over all four planar angles and the state angle,
/// multistarted from the planar-family optimum plus structured seeds near
/// measurement direction pi (where weakly entangled optima live). Needed
/// where the one-parameter family is not optimal, e.g. inefficient
/// detectors.
inline FourAngleOptimum maximize_ch_four_angles(const ScenarioEvaluator& eval,
                                                const OptimizerSpec& opt) {
    const double pi = std::acos(-1.0);
    const bool with_theta =
        opt.optimize_theta && eval.scenario().particles == Scenario::Particles::independent;
    const ChOptimum planar = maximize_ch(eval, opt);

    struct Seed {
        SettingsAngles angles;
        double theta;
    };
    std::vector<Seed> seeds;
    seeds.push_back({SettingsAngles::from_planar(planar.alpha), planar.theta});
    if (with_theta) {
        // Mirror of the planar optimum through pi, with the state orientation
        // flipped accordingly.
        seeds.push_back({{pi, pi - 2.0 * planar.alpha, pi - planar.alpha, pi + planar.alpha},
                         0.5 * pi - planar.theta});
        // Party-antisymmetric geometry around pi with a weakly entangled state.
        seeds.push_back({{pi + 0.05, pi - 0.5, pi - 0.05, pi + 0.5}, 0.06});
    }

    FourAngleOptimum best{planar.ch, SettingsAngles::from_planar(planar.alpha), planar.theta};
    int steps = 0;
    for (const auto& seed : seeds) {
        SettingsAngles ang = seed.angles;
        double theta = seed.theta;
        double* coords[4] = {&ang.a1, &ang.a2, &ang.b1, &ang.b2};
        for (int round = 0; round < 8; ++round) {
            for (double* c : coords) {
                const double center = *c;
                const double refined = detail::golden_max(
                    [&](double v) {
                        *c = v;
                        return eval.ch(ang, theta);
                    },
                    center - 0.3 * pi, center + 0.3 * pi, opt.refine_tol, &steps);
                *c = refined;
            }
            if (with_theta) {
                theta = detail::golden_max([&](double t) { return eval.ch(ang, t); },
                                           std::max(theta - 0.2, 1e-9),
                                           std::min(theta + 0.2, 0.5 * pi - 1e-9),
                                           opt.refine_tol, &steps);
            }
        }
        const double value = eval.ch(ang, theta);
        if (value > best.ch) best = {value, ang, theta};
    }
    return best;
}

struct NoiseResistance {
    double epsilon = 0.0;       // white-noise fraction at the threshold
    double sigma = 0.0;         // rotation-noise width (symmetric scenarios)
    bool violation_at_zero = false;
    ChOptimum critical_optimum; // optimum at the last violating noise level
};

/// Largest noise level whose re-optimized CH still violates. Werner noise is
/// bisected in epsilon directly; rotation noise is bisected in sigma and
/// reported through the single-pair epsilon correspondence.
inline NoiseResistance noise_resistance(Scenario sc, const OptimizerSpec& opt,
                                        double tol = 1e-6) {
    sc.validate();
    const bool rotational = sc.particles == Scenario::Particles::symmetric;
    if (!rotational && sc.noise == Scenario::NoiseKind::none) sc.noise = Scenario::NoiseKind::werner;
    if (rotational) sc.noise = Scenario::NoiseKind::rotation;

    auto probe = [&](double level) {
        Scenario probe_sc = sc;
        if (rotational) {
            probe_sc.sigma = level;
        } else {
            probe_sc.epsilon = level;
        }
        return maximize_ch(probe_sc, opt);
    };
    auto to_epsilon = [&](double level) {
        return rotational ? noise_fraction_from_sigma(level) : level;
    };

    NoiseResistance res;
    ChOptimum at_zero = probe(0.0);
    if (!at_zero.violates()) {
        res.violation_at_zero = false;
        res.critical_optimum = at_zero;
        return res;
    }
    res.violation_at_zero = true;

    double lo = 0.0;
    double hi = rotational ? 2.0 : 1.0;
    ChOptimum lo_opt = at_zero;
    ChOptimum hi_opt = probe(hi);
    if (hi_opt.violates()) {
        res.epsilon = to_epsilon(hi);
        res.sigma = rotational ? hi : 0.0;
        res.critical_optimum = hi_opt;
        return res;
    }
    while (to_epsilon(hi) - to_epsilon(lo) > tol) {
        const double mid = 0.5 * (lo + hi);
        const ChOptimum mid_opt = probe(mid);
        if (mid_opt.violates()) {
            lo = mid;
            lo_opt = mid_opt;
        } else {
            hi = mid;
        }
    }
    res.epsilon = to_epsilon(lo);
    res.sigma = rotational ? lo : 0.0;
    res.critical_optimum = lo_opt;
    return res;
}

struct CriticalEfficiency {
    double eta = 1.0;
    bool found = false;
    FourAngleOptimum optimum_at_threshold;
};

/// Smallest detector efficiency with a violating re-optimized CH. The inner
/// optimization frees all four settings; near threshold the optimum leaves
/// the one-parameter family.
inline CriticalEfficiency critical_efficiency(int pairs, const VoteRule& rule,
                                              const OptimizerSpec& opt, double tol = 1e-4,
                                              EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    Scenario sc;
    sc.source = Scenario::SourceKind::fixed;
    sc.pairs = pairs;
    sc.particles = Scenario::Particles::independent;
    sc.detection = Scenario::DetectionKind::efficiency;
    sc.rule = rule;
    sc.empty_event = policy;

    auto probe = [&](double eta) {
        Scenario probe_sc = sc;
        probe_sc.eta = eta;
        return maximize_ch_four_angles(ScenarioEvaluator(probe_sc), opt);
    };

    CriticalEfficiency res;
    FourAngleOptimum at_one = probe(1.0);
    if (!at_one.violates()) {
        res.eta = 1.0;
        res.found = false;
        res.optimum_at_threshold = at_one;
        return res;
    }
    double lo = 0.0;  // not violating
    double hi = 1.0;  // violating
    FourAngleOptimum hi_opt = at_one;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const FourAngleOptimum mid_opt = probe(mid);
        if (mid_opt.violates()) {
            hi = mid;
            hi_opt = mid_opt;
        } else {
            lo = mid;
        }
    }
    res.eta = hi;
    res.found = true;
    res.optimum_at_threshold = hi_opt;
    return res;
}

}  // namespace multipair
