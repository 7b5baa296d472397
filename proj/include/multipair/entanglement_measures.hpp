#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace multipair {

namespace detail {

inline double log_choose(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("log_choose: k out of range");
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

/// Entanglement (bits) left in M identically prepared singlet-class pairs
/// once the pairing between the two sides is classically forgotten. The state
/// decomposes over total-spin-j sectors, each maximally entangled across
/// 2j+1 levels:
///   E_d = sum_j (2j+1)^2 / (2^M (M+1)) * C(M+1, M/2-j) * log2(2j+1).
/// Defined for even M only.
inline double entanglement_distinguishable(int M) {
    if (M < 2 || M % 2 != 0) {
        throw std::invalid_argument("entanglement_distinguishable: M must be even and >= 2");
    }
    const double log_norm = M * std::log(2.0) + std::log(M + 1.0);
    double sum = 0.0;
    for (int j = M / 2; j >= 1; --j) {  // j = 0 contributes nothing
        const double d = 2.0 * j + 1.0;
        const double logw = 2.0 * std::log(d) + detail::log_choose(M + 1, M / 2 - j) - log_norm;
        sum += std::exp(logw) * std::log2(d);
    }
    return sum;
}

/// Sector weights of the pairing-forgotten state, indexed by j = 0..M/2.
/// They sum to one.
inline std::vector<double> sector_weights_distinguishable(int M) {
    if (M < 2 || M % 2 != 0) {
        throw std::invalid_argument("sector_weights_distinguishable: M must be even and >= 2");
    }
    const double log_norm = M * std::log(2.0) + std::log(M + 1.0);
    std::vector<double> w;
    for (int j = 0; j <= M / 2; ++j) {
        const double d = 2.0 * j + 1.0;
        w.push_back(std::exp(2.0 * std::log(d) + detail::log_choose(M + 1, M / 2 - j) - log_norm));
    }
    return w;
}

/// Entanglement (bits) of the 2M-photon two-mode state: Schmidt-uniform over
/// M+1 terms, hence log2(M+1).
inline double entanglement_indistinguishable(int M) {
    if (M < 1) throw std::invalid_argument("entanglement_indistinguishable: M must be >= 1");
    return std::log2(M + 1.0);
}

struct EntanglementReport {
    int pairs = 0;
    double e_distinguishable = 0.0;
    double e_indistinguishable = 0.0;
    double ratio = 0.0;
};

inline std::vector<EntanglementReport> ratio_report(const std::vector<int>& pair_counts) {
    std::vector<EntanglementReport> out;
    out.reserve(pair_counts.size());
    for (int M : pair_counts) {
        EntanglementReport r;
        r.pairs = M;
        r.e_distinguishable = entanglement_distinguishable(M);
        r.e_indistinguishable = entanglement_indistinguishable(M);
        r.ratio = r.e_indistinguishable / r.e_distinguishable;
        out.push_back(r);
    }
    return out;
}

}  // namespace multipair
