#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "graph_ceps/error.hpp"

namespace graph_ceps {

// Multichannel audio, samples normalized to full scale [-1, 1).
struct MultichannelClip {
  int sample_rate = 0;
  std::vector<std::vector<double>> channels;

  int n_channels() const { return static_cast<int>(channels.size()); }
  std::size_t n_samples() const { return channels.empty() ? 0 : channels.front().size(); }
};

inline std::int16_t to_pcm16(double x) {
  const double s = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(s, -32768.0, 32767.0));
}

// Rounds every sample to the 16-bit grid, as writing and re-reading would.
inline void quantize_pcm16(MultichannelClip& clip) {
  for (auto& ch : clip.channels)
    for (auto& x : ch) x = to_pcm16(x) / 32768.0;
}

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline void put_u16(std::ofstream& out, std::uint16_t v) {
  const std::array<unsigned char, 2> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b.data()), 2);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace detail

// RIFF/WAVE, PCM 16-bit, interleaved.
inline void write_wav(const std::string& path, const MultichannelClip& clip) {
  if (clip.channels.empty() || clip.sample_rate <= 0)
    throw Error(ErrorKind::invalid_input, "cannot write an empty clip");
  const auto n_ch = static_cast<std::uint16_t>(clip.n_channels());
  const auto n = clip.n_samples();
  for (const auto& ch : clip.channels)
    if (ch.size() != n) throw Error(ErrorKind::invalid_input, "channels differ in length");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  const auto data_bytes = static_cast<std::uint32_t>(n * n_ch * 2);
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, n_ch);
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * n_ch * 2);
  detail::put_u16(out, static_cast<std::uint16_t>(n_ch * 2));
  detail::put_u16(out, 16);
  out.write("data", 4);
  detail::put_u32(out, data_bytes);

  std::vector<std::int16_t> frame(n_ch);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < n_ch; ++c) frame[c] = to_pcm16(clip.channels[c][t]);
    for (auto s : frame) detail::put_u16(out, static_cast<std::uint16_t>(s));
  }
  if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

inline MultichannelClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorKind::invalid_input, path + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, n_ch = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  for (std::size_t pos = 12; pos + 8 <= bytes.size();) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
      format = detail::get_u16(chunk + 8);
      n_ch = detail::get_u16(chunk + 10);
      rate = detail::get_u32(chunk + 12);
      bits = detail::get_u16(chunk + 22);
      // WAVE_FORMAT_EXTENSIBLE: the real format tag opens the sub-format GUID.
      if (format == 0xFFFE && avail >= 26) format = detail::get_u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (format != 1 || bits != 16) throw Error(ErrorKind::invalid_input, path + ": only PCM 16-bit is supported");
  if (n_ch == 0 || rate == 0 || data == nullptr) throw Error(ErrorKind::invalid_input, path + ": incomplete header");

  MultichannelClip clip;
  clip.sample_rate = static_cast<int>(rate);
  const std::size_t n = data_size / (2u * n_ch);
  clip.channels.assign(n_ch, std::vector<double>(n));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < n_ch; ++c) {
      const auto raw = static_cast<std::int16_t>(detail::get_u16(data + 2 * (t * n_ch + c)));
      clip.channels[c][t] = raw / 32768.0;
    }
  return clip;
}

}  // namespace graph_ceps
