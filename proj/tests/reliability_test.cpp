// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spnasi/audio_io.hpp"
#include "spnasi/reliability.hpp"

using namespace spnasi;

namespace {

std::vector<double> unit_rms(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(n);
    for (double& v : x) v = g(rng);
    const double rms = std::sqrt(sum_of_squares(x) / double(n));
    for (double& v : x) v /= rms;
    return x;
}

Matrix filled(std::size_t r, std::size_t c, double v) { return Matrix(r, c, v); }

}  // namespace

TEST(MixAtSnr, GainFormula) {
    const auto clean = unit_rms(4000, 1), noise = unit_rms(4000, 2);
    MixSpec spec;
    spec.noise_offset = 0;
    EXPECT_NEAR(mix_at_snr(clean, noise, spec).gain, 1.0, 1e-12);
    spec.snr_db = 20.0;
    EXPECT_NEAR(mix_at_snr(clean, noise, spec).gain, 0.1, 1e-12);
}

TEST(MixAtSnr, AchievedSnrExact) {
    const auto clean = unit_rms(8000, 3), noise = unit_rms(30000, 4);
    for (double snr : {-5.0, 0.0, 5.0, 10.0, 15.0}) {
        MixSpec spec;
        spec.snr_db = snr;
        spec.seed = 9;
        const auto m = mix_at_snr(clean, noise, spec);
        EXPECT_NEAR(snr_db_of(clean, m.scaled_noise), snr, 1e-9);
        for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_EQ(m.noisy[i], clean[i] + m.scaled_noise[i]);
    }
}

TEST(MixAtSnr, OffsetDrawnFromSeed) {
    const auto clean = unit_rms(1000, 5), noise = unit_rms(5000, 6);
    MixSpec a;
    a.seed = 1;
    EXPECT_EQ(mix_at_snr(clean, noise, a).noise_offset, mix_at_snr(clean, noise, a).noise_offset);
    a.noise_offset = 4001;
    EXPECT_THROW(mix_at_snr(clean, noise, a), Error);
}

TEST(MixAtSnr, Errors) {
    const auto clean = unit_rms(1000, 5);
    MixSpec spec;
    EXPECT_THROW(mix_at_snr(clean, unit_rms(500, 1), spec), Error);
    EXPECT_THROW(mix_at_snr(std::vector<double>(1000, 0.0), unit_rms(2000, 1), spec), Error);
    EXPECT_THROW(mix_at_snr(clean, std::vector<double>(2000, 0.0), spec), Error);
}

TEST(OracleSnr, Examples) {
    const auto n = filled(2, 257, 3.0);
    const auto same = oracle_a_priori_snr(n, n);
    for (double v : same.data()) EXPECT_EQ(v, 1.0);
    const auto four = oracle_a_priori_snr(filled(2, 257, 12.0), n);
    for (double v : four.data()) EXPECT_EQ(v, 4.0);
    const auto huge = oracle_a_priori_snr(filled(1, 257, 1.0), filled(1, 257, 0.0));
    for (double v : huge.data()) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_EQ(v, 1.0 / kLogFloor);
    }
}

TEST(SubbandSnr, ConstantsPreserved) {
    const auto fb = build_mel_filterbank();
    const auto one = subband_snr(filled(3, 257, 1.0), fb);
    for (double v : one.data()) EXPECT_NEAR(v, 1.0, 1e-12);
    const auto four = subband_snr(filled(3, 257, 4.0), fb);
    for (double v : four.data()) EXPECT_NEAR(v, 4.0, 1e-12);
}

TEST(SubbandSnr, ToyFilterbankRamp) {
    MelFilterbank fb;
    fb.weights = Matrix(2, 4);
    // Band 0 weights (1, 0.5, 0, 0); band 1 weights (0, 0.5, 1, 0.5).
    fb.weights(0, 0) = 1.0;
    fb.weights(0, 1) = 0.5;
    fb.weights(1, 1) = 0.5;
    fb.weights(1, 2) = 1.0;
    fb.weights(1, 3) = 0.5;
    Matrix xi(1, 4);
    for (std::size_t k = 0; k < 4; ++k) xi(0, k) = double(k);
    const auto s = subband_snr(xi, fb);
    EXPECT_NEAR(s(0, 0), 0.5 / 1.5, 1e-15);
    EXPECT_NEAR(s(0, 1), (0.5 + 2.0 + 1.5) / 2.0, 1e-15);
}

TEST(ReliabilityMask, StrictThreshold) {
    Matrix xi(1, 3);
    xi(0, 0) = 1.0;
    xi(0, 1) = 1.0001;
    xi(0, 2) = 0.0;
    const auto m = reliability_mask(xi);
    EXPECT_FALSE(m(0, 0));
    EXPECT_TRUE(m(0, 1));
    EXPECT_FALSE(m(0, 2));
    EXPECT_EQ(reliability_mask(filled(4, 26, 0.0)).count_reliable(), 0u);
    EXPECT_FALSE(reliability_mask(filled(1, 1, 9.0), 10.0)(0, 0));
}

TEST(BuildEvidence, Modes) {
    Matrix y(2, 3);
    for (std::size_t i = 0; i < 6; ++i) y.data()[i] = double(i);
    const auto all = all_reliable(2, 3);
    for (auto mode : {MarginalMode::none, MarginalMode::marginal, MarginalMode::bounded})
        for (const auto& e : build_evidence(y, all, mode))
            for (const auto& s : e) EXPECT_EQ(s.kind, VariableState::Kind::observed);

    const ReliabilityMask none{2, 3, std::vector<unsigned char>(6, 0)};
    for (const auto& e : build_evidence(y, none, MarginalMode::marginal))
        for (const auto& s : e) EXPECT_EQ(s.kind, VariableState::Kind::missing);

    const ReliabilityMask mixed{2, 3, {1, 0, 1, 0, 0, 1}};
    const auto ev = build_evidence(y, mixed, MarginalMode::bounded);
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t b = 0; b < 3; ++b) {
            const auto& s = ev[t][b];
            EXPECT_EQ(s.kind, mixed(t, b) ? VariableState::Kind::observed : VariableState::Kind::upper_bounded);
            EXPECT_EQ(s.value, y(t, b));
        }
    EXPECT_THROW(build_evidence(y, all_reliable(3, 3), MarginalMode::none), Error);
}

TEST(OracleMask, HighSnrAllReliable) {
    const auto clean = unit_rms(4000, 7), noise = unit_rms(4000, 8);
    MixSpec spec;
    spec.snr_db = 60.0;
    spec.noise_offset = 0;
    const auto m = mix_at_snr(clean, noise, spec);
    const FeatureExtractor fx;
    const auto mask = oracle_mask(clean, m.scaled_noise, fx);
    EXPECT_EQ(mask.count_reliable(), mask.rows * mask.cols);
    const auto psd_mask = oracle_mask(clean, m.scaled_noise, fx, SnrAggregation::psd_ratio);
    EXPECT_EQ(psd_mask.count_reliable(), psd_mask.rows * psd_mask.cols);
}

TEST(AudioIo, WavRoundTrip) {
    std::vector<double> x(1000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * std::sin(0.01 * double(i));
    const auto q = quantize_pcm16(x);
    const auto w = decode_wav(encode_wav({x, 16000}));
    EXPECT_EQ(w.sample_rate, 16000u);
    EXPECT_EQ(w.samples, q);
}

TEST(AudioIo, WavRejectsOtherFormats) {
    auto bytes = encode_wav({std::vector<double>(10, 0.1), 16000});
    auto stereo = bytes;
    stereo[22] = 2;
    EXPECT_THROW(decode_wav(stereo), Error);
    auto rate = bytes;
    rate[24] = 0x44;  // 15940 Hz
    EXPECT_THROW(decode_wav(rate), Error);
    EXPECT_THROW(decode_wav(bytes.substr(0, 30)), Error);
    EXPECT_THROW(decode_wav("not a wav file at all"), Error);
}

TEST(AudioIo, MatrixFilesRoundTrip) {
    Matrix f(3, 4);
    for (std::size_t i = 0; i < 12; ++i) f.data()[i] = std::sqrt(double(i)) - 1.0;
    EXPECT_EQ(decode_feature_matrix(encode_feature_matrix(f)), f);
    const ReliabilityMask m{2, 2, {1, 0, 0, 1}};
    EXPECT_EQ(decode_mask(encode_mask(m)), m);

    auto bytes = encode_feature_matrix(f);
    EXPECT_THROW(decode_mask(bytes), Error);
    bytes[4] = 2;
    EXPECT_THROW(decode_feature_matrix(bytes), Error);
    EXPECT_THROW(decode_feature_matrix(encode_feature_matrix(f).substr(0, 40)), Error);
}
