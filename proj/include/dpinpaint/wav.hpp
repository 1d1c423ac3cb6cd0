// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal RIFF/WAVE reader and writer: PCM 16/24-bit and IEEE float 32-bit.
// Samples are held as doubles in [-1, 1]. Integer samples are scaled by
// 2^(bits-1), so a read followed by a write in the same format reproduces the
// payload bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dpinpaint/common.hpp"

namespace dpinpaint {

enum class SampleFormat { pcm16, pcm24, float32 };

struct Audio {
  double sample_rate = 44100.0;
  SampleFormat format = SampleFormat::pcm16;
  Waveform samples;
  int source_channels = 1;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

inline Audio decode_wav(const std::vector<unsigned char>& bytes,
                        const std::string& name = "<memory>") {
  using detail::le16;
  using detail::le32;
  auto bad = [&](const std::string& why) {
    return ValidationError("wav " + name + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw bad("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t tag = 0, channels = 0, bits = 0, block = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = le32(&bytes[pos + 4]);
    const unsigned char* body = &bytes[pos + 8];
    const std::size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(&bytes[pos], "fmt ", 4) == 0) {
      if (size < 16 || size > avail) throw bad("truncated fmt chunk");
      tag = le16(body);
      channels = le16(body + 2);
      rate = le32(body + 4);
      block = le16(body + 12);
      bits = le16(body + 14);
      if (tag == 0xFFFE) {
        if (size < 26) throw bad("truncated extensible fmt chunk");
        tag = le16(body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(&bytes[pos], "data", 4) == 0) {
      data = body;
      data_size = std::min<std::size_t>(size, avail);
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt) throw bad("missing fmt chunk");
  if (data == nullptr) throw bad("missing data chunk");
  if (channels == 0 || rate == 0) throw bad("zero channels or sample rate");

  Audio a;
  a.sample_rate = rate;
  a.source_channels = channels;
  if (tag == 1 && bits == 16)
    a.format = SampleFormat::pcm16;
  else if (tag == 1 && bits == 24)
    a.format = SampleFormat::pcm24;
  else if (tag == 3 && bits == 32)
    a.format = SampleFormat::float32;
  else
    throw bad("unsupported encoding (format tag " + std::to_string(tag) + ", " +
              std::to_string(bits) + " bits)");
  const std::size_t width = bits / 8;
  if (block != width * channels) throw bad("inconsistent block alignment");
  const std::size_t frames = data_size / block;
  if (frames == 0) throw bad("no audio samples");

  a.samples.assign(frames, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * block + c * width;
      double v = 0.0;
      switch (a.format) {
        case SampleFormat::pcm16:
          v = static_cast<std::int16_t>(le16(p)) / 32768.0;
          break;
        case SampleFormat::pcm24: {
          std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
          if (s & 0x800000) s -= 0x1000000;
          v = s / 8388608.0;
          break;
        }
        case SampleFormat::float32: {
          float fv;
          const std::uint32_t u = le32(p);
          std::memcpy(&fv, &u, 4);
          v = fv;
          break;
        }
      }
      acc += v;
    }
    a.samples[f] = channels == 1 ? acc : acc / channels;
  }
  return a;
}

/// Reads a WAV file. Multichannel input is averaged to mono with a warning
/// on stderr.
inline Audio read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.empty()) throw IoError(path + " is empty");
  Audio a = decode_wav(bytes, path);
  if (a.source_channels > 1)
    std::cerr << "warning: " << path << " has " << a.source_channels
              << " channels; downmixing to mono\n";
  return a;
}

inline std::vector<unsigned char> encode_wav(const Audio& a) {
  require(a.sample_rate > 0.0 && a.sample_rate < 4.3e9, "wav: bad sample rate");
  const std::uint16_t bits = a.format == SampleFormat::pcm16   ? 16
                             : a.format == SampleFormat::pcm24 ? 24
                                                               : 32;
  const std::uint16_t tag = a.format == SampleFormat::float32 ? 3 : 1;
  const std::uint32_t width = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(a.samples.size() * width);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size + 1);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put32(out, 36 + data_size + (data_size & 1));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put32(out, 16);
  detail::put16(out, tag);
  detail::put16(out, 1);
  const auto rate = static_cast<std::uint32_t>(std::lround(a.sample_rate));
  detail::put32(out, rate);
  detail::put32(out, rate * width);
  detail::put16(out, static_cast<std::uint16_t>(width));
  detail::put16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put32(out, data_size);
  for (double v : a.samples) {
    switch (a.format) {
      case SampleFormat::pcm16: {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(s)));
        break;
      }
      case SampleFormat::pcm24: {
        const double s = std::clamp(std::round(v * 8388608.0), -8388608.0, 8388607.0);
        const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(s));
        out.push_back(static_cast<unsigned char>(u));
        out.push_back(static_cast<unsigned char>(u >> 8));
        out.push_back(static_cast<unsigned char>(u >> 16));
        break;
      }
      case SampleFormat::float32: {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put32(out, u);
        break;
      }
    }
  }
  if (data_size & 1) out.push_back(0);
  return out;
}

inline void write_wav(const std::string& path, const Audio& a) {
  const auto bytes = encode_wav(a);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline SampleFormat parse_sample_format(const std::string& s) {
  if (s == "pcm16") return SampleFormat::pcm16;
  if (s == "pcm24") return SampleFormat::pcm24;
  if (s == "float32") return SampleFormat::float32;
  throw ValidationError("unknown sample format '" + s + "'");
}

}  // namespace dpinpaint
