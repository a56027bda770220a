// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_SYNTH_HPP
#define SPNASI_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "spnasi/common.hpp"

// Synthetic stand-ins for a speech corpus and for noise recordings. Each
// talker is a pulse-train source with a talker-specific pitch, passed through
// three talker-specific resonators, with syllable-rate amplitude modulation.

namespace spnasi {

struct Utterance {
    std::string name;
    std::vector<double> samples;
    std::size_t sample_rate = 16000;
};

struct SpeakerData {
    std::string id;
    std::vector<Utterance> train;
    std::vector<Utterance> test;
};

struct Corpus {
    std::vector<SpeakerData> speakers;  // sorted by id
};

struct NoiseSource {
    std::string name;
    std::vector<double> samples;
};

struct VoiceProfile {
    double f0_hz = 120.0;
    std::array<double, 3> formants_hz{500.0, 1500.0, 2500.0};
    std::array<double, 3> bandwidths_hz{90.0, 130.0, 180.0};
};

namespace detail {

inline constexpr double kSynthRate = 16000.0;

// Two-pole resonator, unity gain at DC removed by normalising peak gain.
class Resonator {
public:
    Resonator(double freq_hz, double bw_hz) {
        const double r = std::exp(-std::numbers::pi * bw_hz / kSynthRate);
        const double theta = 2.0 * std::numbers::pi * freq_hz / kSynthRate;
        a1_ = 2.0 * r * std::cos(theta);
        a2_ = -r * r;
        gain_ = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
    }
    double operator()(double x) {
        const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
        y2_ = y1_;
        y1_ = y;
        return y;
    }

private:
    double a1_ = 0.0, a2_ = 0.0, gain_ = 1.0, y1_ = 0.0, y2_ = 0.0;
};

inline void normalize_rms(std::vector<double>& x, double target) {
    double e = 0.0;
    for (double v : x) e += v * v;
    const double rms = std::sqrt(e / static_cast<double>(std::max<std::size_t>(x.size(), 1)));
    if (rms > 0.0)
        for (double& v : x) v *= target / rms;
}

}  // namespace detail

/// Talker profiles with pitch spread over 80-300 Hz and formants drawn from
/// stratified, independently permuted grids so no two talkers share a band.
inline std::vector<VoiceProfile> make_voice_profiles(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(derive_seed(seed, "voices"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto strata = [&] {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        std::shuffle(p.begin(), p.end(), rng);
        return p;
    };
    const auto p0 = strata(), p1 = strata(), p2 = strata(), p3 = strata();
    const double dn = static_cast<double>(n);
    std::vector<VoiceProfile> out(n);
    for (std::size_t s = 0; s < n; ++s) {
        auto pick = [&](std::size_t slot, double lo, double hi) {
            return lo + (hi - lo) * (static_cast<double>(slot) + 0.25 + 0.5 * unit(rng)) / dn;
        };
        out[s].f0_hz = pick(p0[s], 80.0, 300.0);
        out[s].formants_hz = {pick(p1[s], 300.0, 900.0), pick(p2[s], 1000.0, 2400.0), pick(p3[s], 2600.0, 4200.0)};
    }
    return out;
}

/// One utterance of a talker: vibrato on the pitch, small per-utterance
/// formant drift, syllable-rate envelope and a low broadband floor.
inline std::vector<double> synthesize_voice(const VoiceProfile& v, double seconds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto n = static_cast<std::size_t>(seconds * detail::kSynthRate);

    std::array<detail::Resonator, 3> tract{
        detail::Resonator(v.formants_hz[0] * (1.0 + 0.03 * (unit(rng) - 0.5)), v.bandwidths_hz[0]),
        detail::Resonator(v.formants_hz[1] * (1.0 + 0.03 * (unit(rng) - 0.5)), v.bandwidths_hz[1]),
        detail::Resonator(v.formants_hz[2] * (1.0 + 0.03 * (unit(rng) - 0.5)), v.bandwidths_hz[2])};
    const double vib_rate = 0.5 + unit(rng);
    const double vib_phase = 2.0 * std::numbers::pi * unit(rng);
    const double syl_rate = 3.0 + 2.0 * unit(rng);
    const double syl_phase = 2.0 * std::numbers::pi * unit(rng);

    std::vector<double> out(n);
    double phase = unit(rng);
    double tilt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / detail::kSynthRate;
        const double f0 = v.f0_hz * (1.0 + 0.04 * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
        phase += f0 / detail::kSynthRate;
        double pulse = 0.0;
        if (phase >= 1.0) {
            phase -= 1.0;
            pulse = 1.0;
        }
        tilt = 0.7 * tilt + pulse;  // mild spectral tilt
        double y = tilt + 0.02 * gauss(rng);
        for (auto& r : tract) y = r(y);
        const double syl = std::sin(2.0 * std::numbers::pi * syl_rate * t + syl_phase);
        const double env = 0.1 + 0.9 * std::max(0.0, syl);
        out[i] = env * y;
    }
    detail::normalize_rms(out, 0.05);
    for (double& s : out) s += 5e-4 * gauss(rng);
    return out;
}

/// Speakers spk00, spk01, ...; the first `test_per_speaker` utterances of each
/// speaker are held out for testing.
inline Corpus generate_synthetic_corpus(std::uint64_t seed, std::size_t n_speakers, std::size_t utterances_per_speaker,
                                        double utterance_seconds, std::size_t test_per_speaker = 0) {
    if (n_speakers < 2) fail(ErrorKind::input, "synthetic corpus needs at least 2 speakers");
    if (utterances_per_speaker < 2) fail(ErrorKind::input, "synthetic corpus needs at least 2 utterances per speaker");
    if (!(utterance_seconds > 0.0)) fail(ErrorKind::input, "utterance length must be positive");
    if (test_per_speaker == 0) test_per_speaker = std::max<std::size_t>(1, utterances_per_speaker / 3);
    if (test_per_speaker >= utterances_per_speaker)
        fail(ErrorKind::input, "test_per_speaker must leave at least one training utterance");

    const auto voices = make_voice_profiles(seed, n_speakers);
    Corpus c;
    const int width = n_speakers > 100 ? 3 : 2;
    for (std::size_t s = 0; s < n_speakers; ++s) {
        SpeakerData spk;
        char id[32];
        std::snprintf(id, sizeof id, "spk%0*zu", width, s);
        spk.id = id;
        for (std::size_t u = 0; u < utterances_per_speaker; ++u) {
            char name[32];
            std::snprintf(name, sizeof name, "utt%03zu", u);
            Utterance utt{name, synthesize_voice(voices[s], utterance_seconds, derive_seed(seed, s * 100003 + u)), 16000};
            (u < test_per_speaker ? spk.test : spk.train).push_back(std::move(utt));
        }
        c.speakers.push_back(std::move(spk));
    }
    return c;
}

/// Band-pass filtered noise bursts with random on/off durations.
inline std::vector<double> synthesize_burst_noise(double seconds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto n = static_cast<std::size_t>(seconds * detail::kSynthRate);
    std::vector<double> out(n);
    std::size_t i = 0;
    while (i < n) {
        const auto len = static_cast<std::size_t>((0.05 + 0.25 * unit(rng)) * detail::kSynthRate);
        const auto gap = static_cast<std::size_t>((0.02 + 0.15 * unit(rng)) * detail::kSynthRate);
        detail::Resonator band(300.0 + 3500.0 * unit(rng), 400.0 + 1200.0 * unit(rng));
        const double level = 0.3 + unit(rng);
        for (std::size_t j = 0; j < len && i < n; ++j, ++i) {
            const double ramp = std::min(1.0, std::min(static_cast<double>(j), static_cast<double>(len - j)) / 160.0);
            out[i] = level * ramp * band(gauss(rng));
        }
        for (std::size_t j = 0; j < gap && i < n; ++j, ++i) out[i] = 0.02 * gauss(rng);
    }
    detail::normalize_rms(out, 0.05);
    return out;
}

/// Stationary noise with a low-pass (roughly -6 dB/octave) spectrum.
inline std::vector<double> synthesize_colored_noise(double seconds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto n = static_cast<std::size_t>(seconds * detail::kSynthRate);
    std::vector<double> out(n);
    double y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y = 0.95 * y + gauss(rng);
        out[i] = y;
    }
    detail::normalize_rms(out, 0.05);
    return out;
}

/// Mixture of several synthetic talkers that are not in the enrolled set.
inline std::vector<double> synthesize_babble_noise(double seconds, std::uint64_t seed, std::size_t talkers = 6) {
    const auto voices = make_voice_profiles(derive_seed(seed, "babble"), talkers);
    std::vector<double> out(static_cast<std::size_t>(seconds * detail::kSynthRate), 0.0);
    for (std::size_t t = 0; t < talkers; ++t) {
        const auto v = synthesize_voice(voices[t], seconds, derive_seed(seed, t));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    }
    detail::normalize_rms(out, 0.05);
    return out;
}

/// The default synthetic noise set used by the experiment tooling.
inline std::vector<NoiseSource> synthetic_noise_sources(std::uint64_t seed, double seconds = 12.0) {
    return {{"bursts", synthesize_burst_noise(seconds, derive_seed(seed, "bursts"))},
            {"colored", synthesize_colored_noise(seconds, derive_seed(seed, "colored"))}};
}

}  // namespace spnasi

#endif
