// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_WAV_HPP
#define ADVSIG_WAV_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "advsig/common.hpp"

namespace advsig {

// All audio in this toolkit lives on the PCM-16 grid: sample values are
// n / 32768 with n in [-32768, 32767]. Synthesis and attack outputs are
// snapped to the grid before use, so a WAV round trip is bit-exact and
// deltas between stored pairs are exact in double precision.

inline constexpr Scalar kPcmScale = 32768.0;

inline std::int16_t pcm16_from_sample(Scalar x) {
  long n = std::lround(x * kPcmScale);
  if (n > 32767) n = 32767;
  if (n < -32768) n = -32768;
  return static_cast<std::int16_t>(n);
}

inline Scalar sample_from_pcm16(std::int16_t n) { return static_cast<Scalar>(n) / kPcmScale; }

// Snaps a waveform onto the PCM-16 grid (round to nearest grid point, clamped).
inline void quantize_waveform(std::vector<Scalar>& w) {
  for (Scalar& x : w) x = sample_from_pcm16(pcm16_from_sample(x));
}

namespace detail {

inline void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u16(std::ofstream& f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 2);
}

inline std::uint32_t get_u32(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t get_u16(std::istream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace detail

// Writes mono PCM-16 RIFF WAV.
inline void write_wav(const std::string& path, const std::vector<Scalar>& samples, int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DependencyError("cannot open for writing: " + path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  detail::put_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  detail::put_u32(f, 16);
  detail::put_u16(f, 1);  // PCM
  detail::put_u16(f, 1);  // mono
  detail::put_u32(f, static_cast<std::uint32_t>(sample_rate));
  detail::put_u32(f, static_cast<std::uint32_t>(sample_rate * 2));
  detail::put_u16(f, 2);
  detail::put_u16(f, 16);
  f.write("data", 4);
  detail::put_u32(f, data_bytes);
  for (Scalar x : samples) {
    std::int16_t s = pcm16_from_sample(x);
    unsigned char b[2] = {static_cast<unsigned char>(s & 0xff),
                          static_cast<unsigned char>((static_cast<std::uint16_t>(s) >> 8) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!f) throw DependencyError("short write: " + path);
}

struct WavData {
  std::vector<Scalar> samples;
  int sample_rate = 0;
};

// Reads mono PCM-16 RIFF WAV. Skips unknown chunks.
inline WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DependencyError("cannot open: " + path);
  char tag[4];
  f.read(tag, 4);
  if (!f || std::string(tag, 4) != "RIFF") throw ParseError("not a RIFF file: " + path);
  detail::get_u32(f);
  f.read(tag, 4);
  if (!f || std::string(tag, 4) != "WAVE") throw ParseError("not a WAVE file: " + path);

  WavData out;
  std::uint16_t channels = 0, bits = 0;
  bool have_fmt = false;
  while (f.read(tag, 4)) {
    std::uint32_t size = detail::get_u32(f);
    std::string id(tag, 4);
    if (id == "fmt ") {
      std::uint16_t fmt = detail::get_u16(f);
      channels = detail::get_u16(f);
      out.sample_rate = static_cast<int>(detail::get_u32(f));
      detail::get_u32(f);
      detail::get_u16(f);
      bits = detail::get_u16(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      if (fmt != 1) throw ParseError("unsupported WAV encoding (want PCM): " + path);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("WAV data chunk before fmt: " + path);
      if (channels != 1 || bits != 16) throw ParseError("unsupported WAV layout (want mono PCM-16): " + path);
      std::size_t n = size / 2;
      out.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::uint16_t raw = detail::get_u16(f);
        out.samples[i] = sample_from_pcm16(static_cast<std::int16_t>(raw));
      }
      if (!f) throw ParseError("truncated WAV data: " + path);
      return out;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw ParseError("WAV file has no data chunk: " + path);
}

}  // namespace advsig

#endif  // ADVSIG_WAV_HPP
