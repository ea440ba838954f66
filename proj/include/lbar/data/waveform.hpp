/* Copyright 2026 The lbar Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Mono waveforms, RIFF/WAVE reading and writing, linear resampling.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "lbar/error.hpp"

namespace lbar {

struct Waveform {
  std::vector<double> samples;  // mono, nominal range [-1, 1]
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

inline void validate(const Waveform& w) {
  if (w.samples.empty()) throw std::invalid_argument("waveform has no samples");
  if (w.sample_rate <= 0) throw std::invalid_argument("waveform sample rate must be positive");
}

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }
inline std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xFF));
  out.push_back(char(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

constexpr std::uint16_t kWavePcm = 0x0001;
constexpr std::uint16_t kWaveFloat = 0x0003;
constexpr std::uint16_t kWaveExtensible = 0xFFFE;

}  // namespace detail

// Decodes an in-memory RIFF/WAVE image. Supports PCM 16/32-bit and IEEE float
// 32/64-bit, little-endian. Channels are downmixed by their mean; integer
// samples are scaled by 1/2^(bits-1).
inline Waveform decode_wav(std::span<const unsigned char> bytes, const std::string& name = "<memory>") {
  using namespace detail;
  auto fail = [&](const std::string& msg) -> FormatError { return FormatError(name + ": " + msg); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0)
    throw fail("missing RIFF chunk");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) throw fail("RIFF form type is not WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const unsigned char> data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    std::uint32_t len = read_u32(bytes.data() + pos + 4);
    std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Some writers leave a bogus data length after streaming; clamp it.
      if (std::memcmp(id, "data", 4) == 0) len = std::uint32_t(bytes.size() - body);
      else throw fail("chunk '" + std::string(id, 4) + "' overruns the file");
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw fail("'fmt ' chunk too short");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kWaveExtensible) {
        if (len < 40) throw fail("'fmt ' chunk too short for WAVE_FORMAT_EXTENSIBLE");
        format = read_u16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.subspan(body, len);
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw fail("missing 'fmt ' chunk");
  if (data.data() == nullptr) throw fail("missing 'data' chunk");
  if (channels == 0) throw fail("'fmt ' chunk declares zero channels");
  if (rate == 0) throw fail("'fmt ' chunk declares zero sample rate");

  const bool pcm_ok = format == kWavePcm && (bits == 16 || bits == 32);
  const bool float_ok = format == kWaveFloat && (bits == 32 || bits == 64);
  if (!pcm_ok && !float_ok)
    throw fail("unsupported 'fmt ' codec (format tag " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits)");

  const std::size_t frame_bytes = std::size_t(channels) * bits / 8;
  const std::size_t n_frames = data.size() / frame_bytes;
  Waveform w;
  w.sample_rate = int(rate);
  w.samples.resize(n_frames);
  const double int_scale = 1.0 / std::ldexp(1.0, bits - 1);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data.data() + i * frame_bytes + c * (bits / 8);
      if (format == kWavePcm && bits == 16) {
        acc += std::int16_t(read_u16(p)) * int_scale;
      } else if (format == kWavePcm) {
        acc += std::int32_t(read_u32(p)) * int_scale;
      } else if (bits == 32) {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      } else {
        double v;
        std::memcpy(&v, p, 8);
        acc += v;
      }
    }
    w.samples[i] = acc / channels;
  }
  return w;
}

inline Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

enum class WavEncoding { kPcm16, kFloat32, kFloat64 };

inline std::string encode_wav(const Waveform& w, WavEncoding enc = WavEncoding::kFloat32) {
  using namespace detail;
  const std::uint16_t bits = enc == WavEncoding::kPcm16 ? 16 : enc == WavEncoding::kFloat32 ? 32 : 64;
  const std::uint32_t data_len = std::uint32_t(w.samples.size() * bits / 8);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, enc == WavEncoding::kPcm16 ? kWavePcm : kWaveFloat);
  put_u16(out, 1);
  put_u32(out, std::uint32_t(w.sample_rate));
  put_u32(out, std::uint32_t(w.sample_rate) * bits / 8);
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_len);
  for (double s : w.samples) {
    if (enc == WavEncoding::kPcm16) {
      const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put_u16(out, std::uint16_t(std::int16_t(std::lround(clipped * 32768.0))));
    } else if (enc == WavEncoding::kFloat64) {
      std::uint64_t raw;
      std::memcpy(&raw, &s, 8);
      put_u32(out, std::uint32_t(raw));
      put_u32(out, std::uint32_t(raw >> 32));
    } else {
      const float f = float(s);
      std::uint32_t raw;
      std::memcpy(&raw, &f, 4);
      put_u32(out, raw);
    }
  }
  return out;
}

inline void save_wav(const std::filesystem::path& path, const Waveform& w,
                     WavEncoding enc = WavEncoding::kFloat32) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  const std::string bytes = encode_wav(w, enc);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

// Linear-interpolation resampling. Output length is floor(n * target / source);
// output sample k sits at source position k * source / target.
inline Waveform resample_linear(const Waveform& w, int target_sr) {
  if (target_sr <= 0) throw std::invalid_argument("target sample rate must be positive");
  if (target_sr == w.sample_rate) return w;
  validate(w);
  const std::size_t n = w.samples.size();
  const auto out_len = std::size_t((std::uint64_t(n) * std::uint64_t(target_sr)) / std::uint64_t(w.sample_rate));
  Waveform out;
  out.sample_rate = target_sr;
  out.samples.resize(out_len);
  const double step = double(w.sample_rate) / target_sr;
  for (std::size_t k = 0; k < out_len; ++k) {
    const double pos = k * step;
    const auto i = std::size_t(pos);
    const double frac = pos - double(i);
    const double a = w.samples[std::min(i, n - 1)];
    const double b = w.samples[std::min(i + 1, n - 1)];
    out.samples[k] = a + (b - a) * frac;
  }
  return out;
}

}  // namespace lbar
