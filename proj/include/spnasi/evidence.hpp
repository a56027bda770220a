// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_EVIDENCE_HPP
#define SPNASI_EVIDENCE_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "spnasi/common.hpp"

namespace spnasi {

/// State of one feature component when scoring a frame.
///
/// Observed components are reliable and scored with the density. Missing
/// components are integrated over the whole real line and UpperBounded ones
/// over (-inf, value], since a noisy log-energy bounds the clean one from above.
struct VariableState {
    enum class Kind : unsigned char { observed, missing, upper_bounded };

    Kind kind = Kind::missing;
    double value = 0.0;

    static constexpr VariableState observed(double v) { return {Kind::observed, v}; }
    static constexpr VariableState missing() { return {Kind::missing, 0.0}; }
    static constexpr VariableState upper_bounded(double v) { return {Kind::upper_bounded, v}; }

    friend bool operator==(const VariableState&, const VariableState&) = default;
};

using Evidence = std::vector<VariableState>;

inline Evidence all_observed(std::span<const double> x) {
    Evidence e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = VariableState::observed(x[i]);
    return e;
}

inline Evidence all_missing(std::size_t n) { return Evidence(n, VariableState::missing()); }

inline void check_evidence_finite(const Evidence& e) {
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i].kind != VariableState::Kind::missing && !std::isfinite(e[i].value))
            fail(ErrorKind::input, "evidence component " + std::to_string(i) + " is not finite");
    }
}

namespace normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

inline double log_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * d * d / variance;
}

/// log of the standard normal CDF.
///
/// erfc keeps full relative precision in the lower tail; below z = -8 the
/// asymptotic series for the Mills ratio is used, truncated at its smallest term.
inline double log_cdf(double z) {
    if (std::isnan(z)) return z;
    if (z == std::numeric_limits<double>::infinity()) return 0.0;
    if (z == -std::numeric_limits<double>::infinity()) return kNegInf;
    if (z < -8.0) {
        // Phi(z) = phi(z)/|z| * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ...)
        const double inv_z2 = 1.0 / (z * z);
        double term = 1.0;
        double series = 1.0;
        for (int n = 1; n < 60; ++n) {
            const double next = -term * (2.0 * n - 1.0) * inv_z2;
            if (std::abs(next) >= std::abs(term)) break;
            term = next;
            series += term;
            if (std::abs(term) < 1e-17 * std::abs(series)) break;
        }
        return -kLogSqrt2Pi - 0.5 * z * z - std::log(-z) + std::log(series);
    }
    if (z <= 0.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
    return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
}

}  // namespace normal

/// Log contribution of one diagonal-Gaussian dimension under the given state:
/// log-pdf for Observed, log Phi for UpperBounded, 0 for Missing.
inline double dimension_log_term(const VariableState& s, double mean, double variance) {
    switch (s.kind) {
        case VariableState::Kind::observed:
            return normal::log_pdf(s.value, mean, variance);
        case VariableState::Kind::upper_bounded:
            return normal::log_cdf((s.value - mean) / std::sqrt(variance));
        case VariableState::Kind::missing:
            break;
    }
    return 0.0;
}

}  // namespace spnasi

#endif
