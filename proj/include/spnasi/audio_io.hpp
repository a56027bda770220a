// Copyright 2026 The spnasi Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SPNASI_AUDIO_IO_HPP
#define SPNASI_AUDIO_IO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spnasi/common.hpp"

// WAV (16-bit PCM mono) and the binary feature/mask matrix files.

namespace spnasi {

struct Waveform {
    std::vector<double> samples;  // full scale is [-1, 1)
    std::size_t sample_rate = 16000;
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint64_t read_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::string read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_binary(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io, "write failed: " + path);
}

}  // namespace detail

/// Decodes a RIFF/WAVE file. Only 16-bit signed PCM, mono, 16 kHz is accepted.
inline Waveform decode_wav(const std::string& bytes, const std::string& name = "wav") {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        fail(ErrorKind::parse, name + ": not a RIFF/WAVE file");
    std::size_t pos = 12;
    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t size = detail::read_u32(p + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) fail(ErrorKind::parse, name + ": truncated chunk");
        if (std::memcmp(p + pos, "fmt ", 4) == 0) {
            if (size < 16) fail(ErrorKind::parse, name + ": short fmt chunk");
            const std::uint16_t format = detail::read_u16(p + body);
            channels = detail::read_u16(p + body + 2);
            rate = detail::read_u32(p + body + 4);
            bits = detail::read_u16(p + body + 14);
            if (format != 1) fail(ErrorKind::parse, name + ": only PCM WAV is supported");
            have_fmt = true;
        } else if (std::memcmp(p + pos, "data", 4) == 0) {
            if (!have_fmt) fail(ErrorKind::parse, name + ": data chunk before fmt chunk");
            if (bits != 16) fail(ErrorKind::parse, name + ": only 16-bit samples are supported");
            if (channels != 1) fail(ErrorKind::parse, name + ": only mono audio is supported");
            if (rate != 16000) fail(ErrorKind::parse, name + ": sample rate must be 16000 Hz, got " + std::to_string(rate));
            Waveform w;
            w.sample_rate = rate;
            w.samples.resize(size / 2);
            for (std::size_t i = 0; i < w.samples.size(); ++i)
                w.samples[i] = static_cast<std::int16_t>(detail::read_u16(p + body + 2 * i)) / 32768.0;
            return w;
        }
        pos = body + size + (size & 1);
    }
    fail(ErrorKind::parse, name + ": no data chunk");
}

/// Encodes as 16-bit PCM; samples are clipped to [-1, 1) and rounded.
inline std::string encode_wav(const Waveform& w) {
    std::string out;
    const auto n = static_cast<std::uint32_t>(w.samples.size());
    out += "RIFF";
    detail::put_u32(out, 36 + 2 * n);
    out += "WAVEfmt ";
    detail::put_u32(out, 16);
    detail::put_u16(out, 1);
    detail::put_u16(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    detail::put_u32(out, static_cast<std::uint32_t>(w.sample_rate * 2));
    detail::put_u16(out, 2);
    detail::put_u16(out, 16);
    out += "data";
    detail::put_u32(out, 2 * n);
    for (double s : w.samples) {
        const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    return out;
}

inline Waveform read_wav(const std::string& path) { return decode_wav(detail::read_binary(path), path); }
inline void write_wav(const std::string& path, const Waveform& w) { detail::write_binary(path, encode_wav(w)); }

/// Rounds every sample to the 16-bit grid, as a write/read cycle would.
inline std::vector<double> quantize_pcm16(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = std::clamp(std::round(x[i] * 32768.0), -32768.0, 32767.0) / 32768.0;
    return out;
}

// Binary matrix files: 4-byte magic, u32 version, u64 rows, u64 cols, then
// row-major payload, all little-endian. Features carry f64, masks u8.
inline constexpr std::array<char, 4> kFeatureMagic{'S', 'P', 'N', 'F'};
inline constexpr std::array<char, 4> kMaskMagic{'S', 'P', 'N', 'M'};
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

namespace detail {

inline std::string matrix_header(const std::array<char, 4>& magic, std::size_t rows, std::size_t cols) {
    std::string out(magic.begin(), magic.end());
    put_u32(out, kMatrixFormatVersion);
    put_u64(out, rows);
    put_u64(out, cols);
    return out;
}

inline std::pair<std::size_t, std::size_t> check_matrix_header(const std::string& bytes,
                                                               const std::array<char, 4>& magic, std::size_t elem,
                                                               const std::string& name) {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), magic.data(), 4) != 0)
        fail(ErrorKind::parse, name + ": bad magic bytes");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t version = read_u32(p + 4);
    if (version != kMatrixFormatVersion) fail(ErrorKind::parse, name + ": unsupported version " + std::to_string(version));
    const std::uint64_t rows = read_u64(p + 8), cols = read_u64(p + 16);
    if (cols != 0 && rows > (bytes.size() - 24) / (cols * elem)) fail(ErrorKind::parse, name + ": truncated payload");
    if (bytes.size() != 24 + rows * cols * elem) fail(ErrorKind::parse, name + ": payload size mismatch");
    return {rows, cols};
}

}  // namespace detail

inline std::string encode_feature_matrix(const Matrix& m) {
    std::string out = detail::matrix_header(kFeatureMagic, m.rows(), m.cols());
    for (double v : m.data()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        detail::put_u64(out, bits);
    }
    return out;
}

inline Matrix decode_feature_matrix(const std::string& bytes, const std::string& name = "features") {
    const auto [rows, cols] = detail::check_matrix_header(bytes, kFeatureMagic, 8, name);
    Matrix m(rows, cols);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 24;
    for (std::size_t i = 0; i < rows * cols; ++i) {
        const std::uint64_t bits = detail::read_u64(p + 8 * i);
        std::memcpy(&m.data()[i], &bits, 8);
    }
    return m;
}

/// Boolean T x B matrix; true marks a reliable component.
struct ReliabilityMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<unsigned char> reliable;  // row-major 0/1

    bool operator()(std::size_t r, std::size_t c) const { return reliable[r * cols + c] != 0; }
    std::size_t count_reliable() const {
        return static_cast<std::size_t>(std::count(reliable.begin(), reliable.end(), 1));
    }
    friend bool operator==(const ReliabilityMask&, const ReliabilityMask&) = default;
};

inline std::string encode_mask(const ReliabilityMask& m) {
    std::string out = detail::matrix_header(kMaskMagic, m.rows, m.cols);
    out.append(m.reliable.begin(), m.reliable.end());
    return out;
}

inline ReliabilityMask decode_mask(const std::string& bytes, const std::string& name = "mask") {
    const auto [rows, cols] = detail::check_matrix_header(bytes, kMaskMagic, 1, name);
    ReliabilityMask m{rows, cols, std::vector<unsigned char>(bytes.begin() + 24, bytes.end())};
    for (unsigned char v : m.reliable)
        if (v > 1) fail(ErrorKind::parse, name + ": mask entries must be 0 or 1");
    return m;
}

inline void write_feature_matrix(const std::string& path, const Matrix& m) {
    detail::write_binary(path, encode_feature_matrix(m));
}
inline Matrix read_feature_matrix(const std::string& path) {
    return decode_feature_matrix(detail::read_binary(path), path);
}
inline void write_mask(const std::string& path, const ReliabilityMask& m) { detail::write_binary(path, encode_mask(m)); }
inline ReliabilityMask read_mask(const std::string& path) { return decode_mask(detail::read_binary(path), path); }

}  // namespace spnasi

#endif
