// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_RELIABILITY_HPP
#define SPNASI_RELIABILITY_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "spnasi/audio_io.hpp"
#include "spnasi/common.hpp"
#include "spnasi/dsp.hpp"
#include "spnasi/evidence.hpp"

namespace spnasi {

struct MixSpec {
    double snr_db = 0.0;
    std::optional<std::size_t> noise_offset;  // drawn from `seed` when unset
    std::uint64_t seed = 0;
};

struct Mixture {
    std::vector<double> noisy;
    std::vector<double> scaled_noise;  // g * noise excerpt, aligned with the clean signal
    double gain = 1.0;
    std::size_t noise_offset = 0;
};

inline double sum_of_squares(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

inline double snr_db_of(std::span<const double> clean, std::span<const double> noise) {
    return 10.0 * std::log10(sum_of_squares(clean) / sum_of_squares(noise));
}

/// Adds a noise excerpt to `clean`, scaled so that the whole-utterance
/// energy ratio equals `spec.snr_db`.
inline Mixture mix_at_snr(std::span<const double> clean, std::span<const double> noise, const MixSpec& spec) {
    const std::size_t n = clean.size();
    if (n == 0) fail(ErrorKind::input, "mix_at_snr: empty clean signal");
    if (noise.size() < n) fail(ErrorKind::input, "mix_at_snr: noise recording shorter than the clean signal");
    if (!std::isfinite(spec.snr_db)) fail(ErrorKind::input, "mix_at_snr: SNR must be finite");
    const std::size_t max_offset = noise.size() - n;
    std::size_t offset = 0;
    if (spec.noise_offset) {
        offset = *spec.noise_offset;
        if (offset > max_offset) fail(ErrorKind::input, "mix_at_snr: noise offset leaves too few samples");
    } else {
        std::mt19937_64 rng(spec.seed);
        offset = std::uniform_int_distribution<std::size_t>(0, max_offset)(rng);
    }
    const auto excerpt = noise.subspan(offset, n);
    const double ec = sum_of_squares(clean);
    const double en = sum_of_squares(excerpt);
    if (!(ec > 0.0)) fail(ErrorKind::degenerate, "mix_at_snr: clean signal is all zeros");
    if (!(en > 0.0)) fail(ErrorKind::degenerate, "mix_at_snr: noise excerpt is all zeros");

    Mixture m;
    m.noise_offset = offset;
    // RMS(clean) / (RMS(noise) 10^(snr/20)); the sample counts cancel.
    m.gain = std::sqrt(ec / en) / std::pow(10.0, spec.snr_db / 20.0);
    m.scaled_noise.resize(n);
    m.noisy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.scaled_noise[i] = m.gain * excerpt[i];
        m.noisy[i] = clean[i] + m.scaled_noise[i];
    }
    return m;
}

/// Per-bin a-priori SNR computed from the known clean and noise PSDs.
inline Matrix oracle_a_priori_snr(const Matrix& clean_psd, const Matrix& noise_psd) {
    if (clean_psd.rows() != noise_psd.rows() || clean_psd.cols() != noise_psd.cols())
        fail(ErrorKind::input, "oracle_a_priori_snr: PSD shapes differ");
    Matrix xi(clean_psd.rows(), clean_psd.cols());
    for (std::size_t i = 0; i < xi.data().size(); ++i) {
        const double c = clean_psd.data()[i];
        const double v = noise_psd.data()[i];
        if (c < 0.0 || v < 0.0) fail(ErrorKind::input, "oracle_a_priori_snr: PSD values must be non-negative");
        xi.data()[i] = c / std::max(v, kLogFloor);
    }
    return xi;
}

enum class SnrAggregation { mean_xi, psd_ratio };

inline std::string_view to_string(SnrAggregation a) { return a == SnrAggregation::mean_xi ? "mean_xi" : "psd_ratio"; }

/// Filterbank-weighted mean of the per-bin a-priori SNR, per subband.
inline Matrix subband_snr(const Matrix& xi, const MelFilterbank& fb) {
    if (xi.cols() != fb.num_bins()) fail(ErrorKind::input, "subband_snr: bin count does not match filterbank");
    Matrix out(xi.rows(), fb.num_bands());
    std::vector<double> row_sum(fb.num_bands(), 0.0);
    for (std::size_t b = 0; b < fb.num_bands(); ++b)
        for (double h : fb.weights.row(b)) row_sum[b] += h;
    for (std::size_t t = 0; t < xi.rows(); ++t) {
        for (std::size_t b = 0; b < fb.num_bands(); ++b) {
            double acc = 0.0;
            const auto h = fb.weights.row(b);
            for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * xi(t, k);
            out(t, b) = acc / row_sum[b];
        }
    }
    return out;
}

/// Ratio of filtered clean PSD to filtered noise PSD, per subband.
inline Matrix subband_snr_psd_ratio(const Matrix& clean_psd, const Matrix& noise_psd, const MelFilterbank& fb) {
    if (clean_psd.rows() != noise_psd.rows() || clean_psd.cols() != noise_psd.cols() ||
        clean_psd.cols() != fb.num_bins())
        fail(ErrorKind::input, "subband_snr_psd_ratio: shapes differ");
    Matrix out(clean_psd.rows(), fb.num_bands());
    for (std::size_t t = 0; t < clean_psd.rows(); ++t) {
        for (std::size_t b = 0; b < fb.num_bands(); ++b) {
            double c = 0.0, v = 0.0;
            const auto h = fb.weights.row(b);
            for (std::size_t k = 0; k < h.size(); ++k) {
                c += h[k] * clean_psd(t, k);
                v += h[k] * noise_psd(t, k);
            }
            out(t, b) = c / std::max(v, kLogFloor);
        }
    }
    return out;
}

/// A component is reliable when its subband SNR exceeds `threshold_db` (strictly).
inline ReliabilityMask reliability_mask(const Matrix& subband_xi, double threshold_db = 0.0) {
    ReliabilityMask m{subband_xi.rows(), subband_xi.cols(), std::vector<unsigned char>(subband_xi.data().size(), 0)};
    const double ratio = std::pow(10.0, threshold_db / 10.0);
    for (std::size_t i = 0; i < m.reliable.size(); ++i) {
        const double xi = subband_xi.data()[i];
        if (xi < 0.0) fail(ErrorKind::input, "reliability_mask: negative SNR ratio");
        m.reliable[i] = xi > ratio ? 1 : 0;
    }
    return m;
}

inline ReliabilityMask all_reliable(std::size_t rows, std::size_t cols) {
    return {rows, cols, std::vector<unsigned char>(rows * cols, 1)};
}

/// Oracle mask for a mixture: both components framed like the features.
inline ReliabilityMask oracle_mask(std::span<const double> clean, std::span<const double> scaled_noise,
                                   const FeatureExtractor& fx, SnrAggregation agg = SnrAggregation::mean_xi,
                                   double threshold_db = 0.0) {
    const Matrix pc = fx.psd(clean);
    const Matrix pn = fx.psd(scaled_noise);
    const Matrix sub = agg == SnrAggregation::mean_xi ? subband_snr(oracle_a_priori_snr(pc, pn), fx.filterbank())
                                                      : subband_snr_psd_ratio(pc, pn, fx.filterbank());
    return reliability_mask(sub, threshold_db);
}

enum class MarginalMode { none, marginal, bounded };

inline std::string_view to_string(MarginalMode m) {
    switch (m) {
        case MarginalMode::none: return "none";
        case MarginalMode::marginal: return "marginal";
        case MarginalMode::bounded: return "bounded";
    }
    return "?";
}

/// Per-frame evidence: reliable components observed; unreliable ones missing
/// (marginal), bounded above by the noisy value (bounded), or observed anyway (none).
inline std::vector<Evidence> build_evidence(const Matrix& noisy_features, const ReliabilityMask& mask, MarginalMode mode) {
    if (mask.rows != noisy_features.rows() || mask.cols != noisy_features.cols())
        fail(ErrorKind::input, "build_evidence: mask shape does not match features");
    std::vector<Evidence> frames(noisy_features.rows());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        Evidence& e = frames[t];
        e.resize(noisy_features.cols());
        for (std::size_t b = 0; b < e.size(); ++b) {
            const double y = noisy_features(t, b);
            if (mode == MarginalMode::none || mask(t, b)) e[b] = VariableState::observed(y);
            else if (mode == MarginalMode::marginal) e[b] = VariableState::missing();
            else e[b] = VariableState::upper_bounded(y);
        }
    }
    return frames;
}

}  // namespace spnasi

#endif
