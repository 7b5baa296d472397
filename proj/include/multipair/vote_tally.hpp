#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "multipair/pair_core.hpp"

namespace multipair {

/// Maps a detected count m to the minimum number of "+" detections required
/// for the event to vote "+". Ties in the majority rule go to "+".
struct VoteRule {
    enum class Kind { majority, fraction, unanimity, ternary };

    Kind kind = Kind::majority;
    int frac_num = 0;
    int frac_den = 0;

    static VoteRule majority() { return {Kind::majority, 0, 0}; }
    static VoteRule unanimity() { return {Kind::unanimity, 0, 0}; }
    static VoteRule fraction(int num, int den) {
        if (den <= 0 || 2 * num <= den || num >= den) {
            throw std::invalid_argument("VoteRule::fraction: ratio must lie in (1/2, 1)");
        }
        return {Kind::fraction, num, den};
    }
    /// Ternary variant: a side outputs "+" only on a unanimous detected count,
    /// "-" on a unanimous miss, and discards anything in between.
    static VoteRule ternary() { return {Kind::ternary, 0, 0}; }

    int threshold(int m) const {
        if (m < 1) throw std::invalid_argument("VoteRule::threshold: m must be >= 1");
        switch (kind) {
            case Kind::majority: return (m + 1) / 2;
            case Kind::fraction: return (frac_num * m + frac_den - 1) / frac_den;
            case Kind::unanimity:
            case Kind::ternary: return m;
        }
        throw std::logic_error("VoteRule: bad kind");
    }

    bool is_ternary() const { return kind == Kind::ternary; }

    std::string name() const {
        switch (kind) {
            case Kind::majority: return "majority";
            case Kind::fraction:
                return std::to_string(frac_num) + "/" + std::to_string(frac_den);
            case Kind::unanimity: return "unanimity";
            case Kind::ternary: return "ternary";
        }
        return "?";
    }
};

/// Outcome assigned to an event in which a party detected nothing.
enum class EmptyEventPolicy { vote_minus, vote_plus };

struct DetectionModel {
    double eta = 1.0;

    void validate() const {
        if (eta < 0.0 || eta > 1.0) {
            throw std::invalid_argument("DetectionModel: eta must lie in [0, 1]");
        }
    }
};

/// The three probabilities entering the CH expression for one settings pair.
struct ChInputs {
    double p_plus_a = 0.0;
    double p_plus_b = 0.0;
    double p_joint = 0.0;

    void validate() const {
        const double lo = -1e-10, hi = 1.0 + 1e-10;
        if (p_plus_a < lo || p_plus_a > hi || p_plus_b < lo || p_plus_b > hi ||
            p_joint < lo || p_joint > hi) {
            throw std::logic_error("ChInputs: probability out of range");
        }
        if (p_joint > std::min(p_plus_a, p_plus_b) + 1e-10) {
            throw std::logic_error("ChInputs: joint exceeds a marginal");
        }
    }
};

enum class Party { alice, bob };

struct PairCounts {
    int plus_a = 0;
    int minus_a = 0;
    int plus_b = 0;
    int minus_b = 0;

    int detected_a() const { return plus_a + minus_a; }
    int detected_b() const { return plus_b + minus_b; }
};

/// Sparse joint distribution over detected count tuples
/// (n+_A, n-_A, n+_B, n-_B) for a source of `emitted_pairs` pairs.
class CountJointDistribution {
public:
    explicit CountJointDistribution(int emitted_pairs) : emitted_(emitted_pairs) {
        if (emitted_pairs < 0) {
            throw std::invalid_argument("CountJointDistribution: negative pair count");
        }
    }

    void add(const PairCounts& c, double prob) {
        if (prob == 0.0) return;
        table_[pack(c)] += prob;
    }

    int emitted_pairs() const { return emitted_; }

    double total() const {
        double s = 0.0, comp = 0.0;
        for (const auto& [k, p] : table_) {
            const double y = p - comp;
            const double t = s + y;
            comp = (t - s) - y;
            s = t;
        }
        return s;
    }

    std::size_t size() const { return table_.size(); }

    template <class F>
    void for_each(F&& f) const {
        for (const auto& [key, prob] : table_) f(unpack(key), prob);
    }

private:
    static std::uint32_t pack(const PairCounts& c) {
        return (static_cast<std::uint32_t>(c.plus_a) << 24) |
               (static_cast<std::uint32_t>(c.minus_a) << 16) |
               (static_cast<std::uint32_t>(c.plus_b) << 8) |
               static_cast<std::uint32_t>(c.minus_b);
    }
    static PairCounts unpack(std::uint32_t key) {
        return {static_cast<int>(key >> 24), static_cast<int>((key >> 16) & 0xff),
                static_cast<int>((key >> 8) & 0xff), static_cast<int>(key & 0xff)};
    }

    int emitted_;
    std::map<std::uint32_t, double> table_;  // ordered keys keep results reproducible
};

namespace detail {

inline std::vector<double> log_factorials(int n) {
    std::vector<double> lf(static_cast<std::size_t>(n) + 1, 0.0);
    for (int k = 2; k <= n; ++k) {
        lf[static_cast<std::size_t>(k)] = lf[static_cast<std::size_t>(k - 1)] + std::log(k);
    }
    return lf;
}

struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

inline void validate_dist(const PairOutcomeDist& d) {
    const double lo = -1e-9;
    if (d.pp < lo || d.pm < lo || d.mp < lo || d.mm < lo || std::abs(d.sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("PairOutcomeDist: not a probability distribution");
    }
}

}  // namespace detail

/// P[votes "+"] for one party observing M detected particles with per-particle
/// "+" probability p_plus: the binomial tail above the rule threshold.
inline double vote_marginal(int M, double p_plus, const VoteRule& rule,
                            EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    if (M < 0) throw std::invalid_argument("vote_marginal: M must be >= 0");
    if (M == 0) return policy == EmptyEventPolicy::vote_plus ? 1.0 : 0.0;
    if (p_plus < -1e-12 || p_plus > 1.0 + 1e-12) {
        throw std::invalid_argument("vote_marginal: p_plus out of [0, 1]");
    }
    p_plus = std::min(1.0, std::max(0.0, p_plus));
    const int N = rule.threshold(M);
    if (p_plus == 0.0) return 0.0;           // N >= 1 always
    if (p_plus == 1.0) return 1.0;
    const auto lf = detail::log_factorials(M);
    const double lp = std::log(p_plus);
    const double lq = std::log1p(-p_plus);
    detail::KahanSum acc;
    for (int n = N; n <= M; ++n) {
        acc.add(std::exp(lf[static_cast<std::size_t>(M)] - lf[static_cast<std::size_t>(n)] -
                         lf[static_cast<std::size_t>(M - n)] + n * lp + (M - n) * lq));
    }
    return std::min(1.0, acc.sum);
}

inline double vote_marginal(int M, const PairOutcomeDist& dist, Party party, const VoteRule& rule,
                            EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    detail::validate_dist(dist);
    return vote_marginal(M, party == Party::alice ? dist.plus_a() : dist.plus_b(), rule, policy);
}

/// P[both parties vote "+"] for M fully detected pairs: the multinomial sum
/// over outcome count tuples clearing both thresholds. O(M^3) terms.
inline double vote_joint(int M, const PairOutcomeDist& dist, const VoteRule& rule_a,
                         const VoteRule& rule_b,
                         EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    if (M < 0) throw std::invalid_argument("vote_joint: M must be >= 0");
    if (M == 0) return policy == EmptyEventPolicy::vote_plus ? 1.0 : 0.0;
    detail::validate_dist(dist);
    const int NA = rule_a.threshold(M);
    const int NB = rule_b.threshold(M);
    const double p[4] = {dist.pp, dist.pm, dist.mp, dist.mm};
    double lp[4];
    for (int i = 0; i < 4; ++i) lp[i] = p[i] > 0.0 ? std::log(p[i]) : 0.0;
    const auto lf = detail::log_factorials(M);
    const double lfM = lf[static_cast<std::size_t>(M)];

    detail::KahanSum acc;
    for (int npp = 0; npp <= M; ++npp) {
        if (p[0] <= 0.0 && npp > 0) break;
        for (int npm = std::max(0, NA - npp); npm <= M - npp; ++npm) {
            if (p[1] <= 0.0 && npm > 0) continue;
            for (int nmp = std::max(0, NB - npp); nmp <= M - npp - npm; ++nmp) {
                if (p[2] <= 0.0 && nmp > 0) continue;
                const int nmm = M - npp - npm - nmp;
                if (p[3] <= 0.0 && nmm > 0) continue;
                const double logw = lfM - lf[static_cast<std::size_t>(npp)] -
                                    lf[static_cast<std::size_t>(npm)] -
                                    lf[static_cast<std::size_t>(nmp)] -
                                    lf[static_cast<std::size_t>(nmm)] + npp * lp[0] +
                                    npm * lp[1] + nmp * lp[2] + nmm * lp[3];
                acc.add(std::exp(logw));
            }
        }
    }
    return std::min(1.0, acc.sum);
}

/// Marginal and joint vote probabilities for M fully detected pairs.
inline ChInputs lossless_vote_inputs(int M, const PairOutcomeDist& dist, const VoteRule& rule,
                                     EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    ChInputs in{vote_marginal(M, dist, Party::alice, rule, policy),
                vote_marginal(M, dist, Party::bob, rule, policy),
                vote_joint(M, dist, rule, rule, policy)};
    in.validate();
    return in;
}

/// Count law for M fully detected pairs: the plain multinomial over the four
/// outcome categories.
inline CountJointDistribution lossless_count_distribution(int M, const PairOutcomeDist& dist) {
    if (M < 1) throw std::invalid_argument("lossless_count_distribution: M must be >= 1");
    detail::validate_dist(dist);
    const double p[4] = {dist.pp, dist.pm, dist.mp, dist.mm};
    double lp[4];
    for (int i = 0; i < 4; ++i) lp[i] = p[i] > 0.0 ? std::log(p[i]) : 0.0;
    const auto lf = detail::log_factorials(M);
    CountJointDistribution out(M);
    for (int npp = 0; npp <= M; ++npp) {
        if (p[0] <= 0.0 && npp > 0) break;
        for (int npm = 0; npm <= M - npp; ++npm) {
            if (p[1] <= 0.0 && npm > 0) continue;
            for (int nmp = 0; nmp <= M - npp - npm; ++nmp) {
                if (p[2] <= 0.0 && nmp > 0) continue;
                const int nmm = M - npp - npm - nmp;
                if (p[3] <= 0.0 && nmm > 0) continue;
                const double w = std::exp(lf[static_cast<std::size_t>(M)] -
                                          lf[static_cast<std::size_t>(npp)] -
                                          lf[static_cast<std::size_t>(npm)] -
                                          lf[static_cast<std::size_t>(nmp)] -
                                          lf[static_cast<std::size_t>(nmm)] + npp * lp[0] +
                                          npm * lp[1] + nmp * lp[2] + nmm * lp[3]);
                out.add({npp + npm, nmp + nmm, npp + nmp, npm + nmm}, w);
            }
        }
    }
    return out;
}

/// Exact joint law of the four detected counts when each particle is seen
/// with probability eta, independently. Multinomial over the nine per-pair
/// detection categories {+,-,missed} x {+,-,missed}.
inline CountJointDistribution count_distribution_with_efficiency(int M,
                                                                 const PairOutcomeDist& dist,
                                                                 const DetectionModel& det) {
    if (M < 1) throw std::invalid_argument("count_distribution_with_efficiency: M must be >= 1");
    if (M > 32) {
        throw std::invalid_argument(
            "count_distribution_with_efficiency: category enumeration is not sized for M > 32");
    }
    detail::validate_dist(dist);
    det.validate();
    const double eta = det.eta;
    const double miss = 1.0 - eta;

    // Category order: (A outcome, B outcome) with outcome 0="+", 1="-", 2=missed.
    double q[9];
    q[0] = eta * eta * dist.pp;
    q[1] = eta * eta * dist.pm;
    q[2] = eta * miss * dist.plus_a();
    q[3] = eta * eta * dist.mp;
    q[4] = eta * eta * dist.mm;
    q[5] = eta * miss * (dist.mp + dist.mm);
    q[6] = miss * eta * dist.plus_b();
    q[7] = miss * eta * (dist.pm + dist.mm);
    q[8] = miss * miss;

    double lq[9];
    for (int c = 0; c < 9; ++c) lq[c] = q[c] > 0.0 ? std::log(q[c]) : 0.0;
    const auto lf = detail::log_factorials(M);

    CountJointDistribution out(M);
    int n[9] = {0};
    // Depth-first enumeration of all category count tuples summing to M.
    auto recurse = [&](auto&& self, int cat, int remaining, double logw) -> void {
        if (cat == 8) {
            if (q[8] <= 0.0 && remaining > 0) return;
            n[8] = remaining;
            const double w = logw - lf[static_cast<std::size_t>(remaining)] +
                             (q[8] > 0.0 ? remaining * lq[8] : 0.0);
            PairCounts c;
            c.plus_a = n[0] + n[1] + n[2];
            c.minus_a = n[3] + n[4] + n[5];
            c.plus_b = n[0] + n[3] + n[6];
            c.minus_b = n[1] + n[4] + n[7];
            out.add(c, std::exp(w));
            return;
        }
        const int top = q[cat] > 0.0 ? remaining : 0;
        for (int k = 0; k <= top; ++k) {
            n[cat] = k;
            self(self, cat + 1, remaining - k,
                 logw - lf[static_cast<std::size_t>(k)] + k * lq[cat]);
        }
        n[cat] = 0;
    };
    recurse(recurse, 0, M, lf[static_cast<std::size_t>(M)]);
    return out;
}

/// Apply a binary vote to a count distribution. Each party thresholds its own
/// detected total; empty events resolve per policy.
inline ChInputs binary_vote_probs(const CountJointDistribution& counts, const VoteRule& rule,
                                  EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    if (rule.is_ternary()) {
        throw std::invalid_argument("binary_vote_probs: rule is ternary, use ternary_vote_probs");
    }
    detail::KahanSum pa, pb, pab;
    counts.for_each([&](const PairCounts& c, double prob) {
        const int ma = c.detected_a();
        const int mb = c.detected_b();
        const bool va = ma == 0 ? policy == EmptyEventPolicy::vote_plus
                                : c.plus_a >= rule.threshold(ma);
        const bool vb = mb == 0 ? policy == EmptyEventPolicy::vote_plus
                                : c.plus_b >= rule.threshold(mb);
        if (va) pa.add(prob);
        if (vb) pb.add(prob);
        if (va && vb) pab.add(prob);
    });
    ChInputs in{pa.sum, pb.sum, pab.sum};
    in.validate();
    return in;
}

/// CH inputs for M pairs seen through detectors of efficiency eta.
inline ChInputs vote_probs_with_efficiency(int M, const PairOutcomeDist& dist,
                                           const DetectionModel& det, const VoteRule& rule,
                                           EmptyEventPolicy policy = EmptyEventPolicy::vote_minus) {
    return binary_vote_probs(count_distribution_with_efficiency(M, dist, det), rule, policy);
}

/// Count law after removing exactly one particle, uniformly at random, on
/// each side. With weight 1/M both removals hit the same pair; otherwise two
/// pairs are broken, leaving single particles carrying only the marginals.
/// Detected totals are M-1 per side.
inline CountJointDistribution one_loss_each_side_distribution(int M,
                                                              const PairOutcomeDist& dist) {
    if (M < 2) throw std::invalid_argument("one_loss_each_side_distribution: M must be >= 2");
    detail::validate_dist(dist);
    const int D = M - 1;  // detected per side
    const double p[4] = {dist.pp, dist.pm, dist.mp, dist.mm};
    double lp[4];
    for (int i = 0; i < 4; ++i) lp[i] = p[i] > 0.0 ? std::log(p[i]) : 0.0;
    const auto lf = detail::log_factorials(M);

    // grid[i][j] = P[n+_A = i, n+_B = j], accumulated per mixture component.
    std::vector<std::vector<double>> grid(static_cast<std::size_t>(D) + 1,
                                          std::vector<double>(static_cast<std::size_t>(D) + 1,
                                                              0.0));
    auto accumulate_multinomial = [&](int K, double weight, auto&& deposit) {
        for (int npp = 0; npp <= K; ++npp) {
            if (p[0] <= 0.0 && npp > 0) break;
            for (int npm = 0; npm <= K - npp; ++npm) {
                if (p[1] <= 0.0 && npm > 0) continue;
                for (int nmp = 0; nmp <= K - npp - npm; ++nmp) {
                    if (p[2] <= 0.0 && nmp > 0) continue;
                    const int nmm = K - npp - npm - nmp;
                    if (p[3] <= 0.0 && nmm > 0) continue;
                    const double w =
                        weight * std::exp(lf[static_cast<std::size_t>(K)] -
                                          lf[static_cast<std::size_t>(npp)] -
                                          lf[static_cast<std::size_t>(npm)] -
                                          lf[static_cast<std::size_t>(nmp)] -
                                          lf[static_cast<std::size_t>(nmm)] + npp * lp[0] +
                                          npm * lp[1] + nmp * lp[2] + nmm * lp[3]);
                    deposit(npp + npm, npp + nmp, w);
                }
            }
        }
    };

    // Same pair broken on both sides: M-1 intact pairs.
    accumulate_multinomial(M - 1, 1.0 / M, [&](int i, int j, double w) {
        grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += w;
    });

    // Distinct pairs broken: M-2 intact pairs plus one surviving particle per
    // side, distributed by that party's single-pair marginal.
    const double pa = dist.plus_a();
    const double pb = dist.plus_b();
    accumulate_multinomial(M - 2, (M - 1.0) / M, [&](int i, int j, double w) {
        for (int da = 0; da <= 1; ++da) {
            const double wa = da == 1 ? pa : 1.0 - pa;
            if (wa <= 0.0) continue;
            for (int db = 0; db <= 1; ++db) {
                const double wb = db == 1 ? pb : 1.0 - pb;
                if (wb <= 0.0) continue;
                grid[static_cast<std::size_t>(i + da)][static_cast<std::size_t>(j + db)] +=
                    w * wa * wb;
            }
        }
    });

    CountJointDistribution out(M);
    for (int i = 0; i <= D; ++i) {
        for (int j = 0; j <= D; ++j) {
            const double w = grid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (w > 0.0) out.add({i, D - i, j, D - j}, w);
        }
    }
    return out;
}

/// Ternary vote: "+" iff n+ >= N, "-" iff n- >= N, otherwise the event is
/// discarded. No renormalization: discarded events count toward nothing.
inline ChInputs ternary_vote_probs(const CountJointDistribution& counts, int threshold) {
    if (threshold < 1) throw std::invalid_argument("ternary_vote_probs: threshold must be >= 1");
    int max_detected = 0;
    counts.for_each([&](const PairCounts& c, double) {
        max_detected = std::max({max_detected, c.detected_a(), c.detected_b()});
    });
    if (2 * threshold <= max_detected) {
        throw std::invalid_argument(
            "ternary_vote_probs: threshold too low, \"+\" and \"-\" sets would overlap");
    }
    detail::KahanSum pa, pb, pab;
    counts.for_each([&](const PairCounts& c, double prob) {
        const bool va = c.plus_a >= threshold;
        const bool vb = c.plus_b >= threshold;
        if (va) pa.add(prob);
        if (vb) pb.add(prob);
        if (va && vb) pab.add(prob);
    });
    ChInputs in{pa.sum, pb.sum, pab.sum};
    in.validate();
    return in;
}

}  // namespace multipair
