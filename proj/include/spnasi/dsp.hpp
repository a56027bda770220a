// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_DSP_HPP
#define SPNASI_DSP_HPP

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "spnasi/common.hpp"

namespace spnasi {

struct FrameParams {
    std::size_t sample_rate = 16000;
    std::size_t frame_len = 512;    // 32 ms
    std::size_t frame_shift = 256;  // 16 ms
    std::size_t num_bands = 26;

    std::size_t num_bins() const { return frame_len / 2 + 1; }
};

inline void check_frame_params(const FrameParams& p) {
    if (p.frame_len == 0 || p.frame_len % 2 != 0) fail(ErrorKind::input, "frame_len must be even and positive");
    if (p.frame_shift == 0 || p.frame_shift > p.frame_len) fail(ErrorKind::input, "frame_shift must lie in [1, frame_len]");
    if (p.sample_rate == 0) fail(ErrorKind::input, "sample_rate must be positive");
    if (p.num_bands == 0) fail(ErrorKind::input, "num_bands must be positive");
}

/// Symmetric Hamming window 0.54 - 0.46 cos(2 pi n / (N - 1)).
inline std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    return w;
}

inline std::size_t num_frames(std::size_t num_samples, const FrameParams& p) {
    if (num_samples == 0) return 0;
    if (num_samples <= p.frame_len) return 1;
    return 1 + (num_samples - p.frame_len) / p.frame_shift;
}

/// Splits a signal into Hamming-windowed frames (T x frame_len). A signal
/// shorter than one frame yields one zero-padded frame.
inline Matrix frame_signal(std::span<const double> samples, const FrameParams& p) {
    check_frame_params(p);
    if (samples.empty()) fail(ErrorKind::input, "frame_signal: empty signal");
    const std::size_t t = num_frames(samples.size(), p);
    const auto window = hamming_window(p.frame_len);
    Matrix frames(t, p.frame_len);
    for (std::size_t f = 0; f < t; ++f) {
        const std::size_t start = f * p.frame_shift;
        for (std::size_t i = 0; i < p.frame_len && start + i < samples.size(); ++i)
            frames(f, i) = samples[start + i] * window[i];
    }
    return frames;
}

/// Periodogram of real frames: |DFT(x)[k]|^2 for k = 0..N/2, no scaling.
/// Owns an FFTW plan; one instance per thread.
class Periodogram {
public:
    explicit Periodogram(std::size_t n) : n_(n) {
        if (n == 0) fail(ErrorKind::input, "Periodogram: length must be positive");
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    Periodogram(const Periodogram&) = delete;
    Periodogram& operator=(const Periodogram&) = delete;
    ~Periodogram() {
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }

    std::size_t size() const { return n_; }
    std::size_t num_bins() const { return n_ / 2 + 1; }

    void operator()(std::span<const double> frame, std::span<double> psd) {
        if (frame.size() != n_ || psd.size() != num_bins()) fail(ErrorKind::input, "Periodogram: size mismatch");
        std::copy(frame.begin(), frame.end(), in_);
        fftw_execute(plan_);
        for (std::size_t k = 0; k < psd.size(); ++k) psd[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }

    std::vector<double> operator()(std::span<const double> frame) {
        std::vector<double> psd(num_bins());
        (*this)(frame, psd);
        return psd;
    }

    Matrix operator()(const Matrix& frames) {
        Matrix psd(frames.rows(), num_bins());
        for (std::size_t t = 0; t < frames.rows(); ++t) (*this)(frames.row(t), psd.row(t));
        return psd;
    }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    std::size_t n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

inline std::vector<double> periodogram_psd(std::span<const double> frame) {
    Periodogram p(frame.size());
    return p(frame);
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular filters spaced uniformly on the mel scale between 0 Hz and
/// Nyquist, peak amplitude one.
struct MelFilterbank {
    Matrix weights;                 // B x (n_fft/2 + 1)
    std::vector<double> edges_hz;   // B + 2 edge frequencies

    std::size_t num_bands() const { return weights.rows(); }
    std::size_t num_bins() const { return weights.cols(); }
};

inline MelFilterbank build_mel_filterbank(std::size_t num_bands = 26, std::size_t n_fft = 512,
                                          std::size_t sample_rate = 16000) {
    if (num_bands == 0) fail(ErrorKind::input, "filterbank needs at least one band");
    if (n_fft == 0 || n_fft % 2 != 0) fail(ErrorKind::input, "filterbank n_fft must be even");
    const double nyquist = static_cast<double>(sample_rate) / 2.0;
    const double top = hz_to_mel(nyquist);
    MelFilterbank fb;
    fb.edges_hz.resize(num_bands + 2);
    for (std::size_t i = 0; i < fb.edges_hz.size(); ++i)
        fb.edges_hz[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(num_bands + 1));
    fb.edges_hz.back() = nyquist;

    const std::size_t bins = n_fft / 2 + 1;
    fb.weights = Matrix(num_bands, bins);
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n_fft);
    for (std::size_t b = 0; b < num_bands; ++b) {
        const double lo = fb.edges_hz[b], mid = fb.edges_hz[b + 1], hi = fb.edges_hz[b + 2];
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double h = 0.0;
            if (f > lo && f <= mid) h = (f - lo) / (mid - lo);
            else if (f > mid && f < hi) h = (hi - f) / (hi - mid);
            fb.weights(b, k) = h;
            any = any || h > 0.0;
        }
        if (!any)
            fail(ErrorKind::input, "filter " + std::to_string(b) + " has empty support; too many bands for n_fft");
    }
    return fb;
}

/// Log-spectral subband energies ln(max(H P, 1e-12)) of one PSD.
inline std::vector<double> lsse(std::span<const double> psd, const MelFilterbank& fb) {
    if (psd.size() != fb.num_bins()) fail(ErrorKind::input, "lsse: PSD length does not match filterbank");
    std::vector<double> out(fb.num_bands());
    for (std::size_t b = 0; b < out.size(); ++b) {
        double acc = 0.0;
        const auto h = fb.weights.row(b);
        for (std::size_t k = 0; k < psd.size(); ++k) acc += h[k] * psd[k];
        out[b] = std::log(std::max(acc, kLogFloor));
    }
    return out;
}

/// T x B matrix of log-spectral subband energies.
using FeatureSequence = Matrix;

inline FeatureSequence lsse_frames(const Matrix& psd, const MelFilterbank& fb) {
    FeatureSequence out(psd.rows(), fb.num_bands());
    for (std::size_t t = 0; t < psd.rows(); ++t) {
        const auto x = lsse(psd.row(t), fb);
        std::ranges::copy(x, out.row(t).begin());
    }
    return out;
}

/// Periodogram PSDs (T x bins) of the windowed frames of a signal.
inline Matrix frame_psd(std::span<const double> samples, const FrameParams& p) {
    const Matrix frames = frame_signal(samples, p);
    Periodogram pg(p.frame_len);
    return pg(frames);
}

/// Full pipeline: frame, window, periodogram, mel filterbank, log.
class FeatureExtractor {
public:
    explicit FeatureExtractor(FrameParams p = {})
        : params_(p), fb_(build_mel_filterbank(p.num_bands, p.frame_len, p.sample_rate)) {
        check_frame_params(p);
    }

    const FrameParams& params() const { return params_; }
    const MelFilterbank& filterbank() const { return fb_; }

    Matrix psd(std::span<const double> samples) const { return frame_psd(samples, params_); }
    FeatureSequence operator()(std::span<const double> samples) const { return lsse_frames(psd(samples), fb_); }

private:
    FrameParams params_;
    MelFilterbank fb_;
};

inline FeatureSequence extract_features(std::span<const double> samples, const FrameParams& p = {}) {
    return FeatureExtractor(p)(samples);
}

}  // namespace spnasi

#endif
