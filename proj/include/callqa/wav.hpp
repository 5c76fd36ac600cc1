#pragma once
// Minimal RIFF/WAVE reader and writer for 16-bit PCM mono audio.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "callqa/common.hpp"

namespace callqa {

inline constexpr std::uint32_t kMinWavSampleRate = 8000;

struct PcmAudio {
  std::uint32_t sample_rate = 0;
  std::vector<double> samples;  // full-scale units, [-1, 1)
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::ostream& out, std::uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

inline PcmAudio read_wav(std::istream& in) {
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file");
  PcmAudio audio;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t size = detail::read_u32(hdr + 4);
    std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw DataError("truncated WAV chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      std::uint16_t format = detail::read_u16(f);
      std::uint16_t channels = detail::read_u16(f + 2);
      audio.sample_rate = detail::read_u32(f + 4);
      std::uint16_t bits = detail::read_u16(f + 14);
      if (format != 1) throw DataError("WAV is not PCM");
      if (channels != 1) throw DataError("WAV is not mono");
      if (bits != 16) throw DataError("WAV is not 16-bit");
      if (audio.sample_rate < kMinWavSampleRate) throw DataError("WAV sample rate below 8000 Hz");
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw DataError("WAV data chunk precedes fmt chunk");
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        auto v = static_cast<std::int16_t>(detail::read_u16(bytes.data() + body + 2 * i));
        audio.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return audio;
    }
    pos = body + size + (size & 1u);
  }
  throw DataError("WAV has no data chunk");
}

inline PcmAudio read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_wav(in);
}

// Samples are clipped to the 16-bit range.
inline void write_wav(std::ostream& out, const PcmAudio& audio) {
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, audio.sample_rate);
  detail::put_u32(out, audio.sample_rate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.write("data", 4);
  detail::put_u32(out, data_bytes);
  for (double s : audio.samples) {
    double scaled = std::round(s * 32768.0);
    scaled = std::min(32767.0, std::max(-32768.0, scaled));
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
}

}  // namespace callqa
