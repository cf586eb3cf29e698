#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "clarity/audio.hpp"
#include "clarity/common.hpp"

namespace clarity {

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// PCM 16-bit little-endian reader. Multichannel input collapses to channel 0.
inline AudioSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("read failed for " + path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    std::uint32_t len = detail::read_u32le(bytes.data() + pos + 4);
    pos += 8;
    if (len > bytes.size() - pos) throw FormatError(path + ": truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError(path + ": fmt chunk too short");
      format = detail::read_u16le(bytes.data() + pos);
      channels = detail::read_u16le(bytes.data() + pos + 2);
      rate = detail::read_u32le(bytes.data() + pos + 4);
      bits = detail::read_u16le(bytes.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr) throw FormatError(path + ": missing fmt or data chunk");
  if (format != 1 || bits != 16) {
    throw FormatError(path + ": only PCM-16 supported (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits)");
  }
  if (channels == 0) throw FormatError(path + ": zero channels");
  if (rate == 0) throw FormatError(path + ": zero sample rate");
  if (channels > 1) warn("%s: %u channels, keeping channel 0", path.c_str(), channels);

  const std::size_t stride = 2u * channels;
  const std::size_t n = data_len / stride;
  AudioSignal sig(std::vector<double>(n), static_cast<int>(rate));
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t v = static_cast<std::int16_t>(detail::read_u16le(data + i * stride));
    sig.samples[i] = v / 32768.0;
  }
  return sig;
}

// PCM 16-bit little-endian mono writer; samples clipped to [-1, 1).
inline void write_wav(const std::string& path, const AudioSignal& sig) {
  sig.check_finite("write_wav");
  std::string body;
  body.reserve(44 + 2 * sig.size());
  body += "RIFF";
  detail::put_u32le(body, static_cast<std::uint32_t>(36 + 2 * sig.size()));
  body += "WAVEfmt ";
  detail::put_u32le(body, 16);
  detail::put_u16le(body, 1);  // PCM
  detail::put_u16le(body, 1);  // mono
  detail::put_u32le(body, static_cast<std::uint32_t>(sig.sample_rate));
  detail::put_u32le(body, static_cast<std::uint32_t>(sig.sample_rate * 2));
  detail::put_u16le(body, 2);
  detail::put_u16le(body, 16);
  body += "data";
  detail::put_u32le(body, static_cast<std::uint32_t>(2 * sig.size()));
  for (double s : sig.samples) {
    double scaled = std::round(s * 32768.0);
    scaled = std::clamp(scaled, -32768.0, 32767.0);
    detail::put_u16le(body, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace clarity
