#include "avatr/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "avatr/error.hpp"

namespace avatr::audio {

namespace {

std::uint32_t u32(const unsigned char* p) { return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24); }
std::uint16_t u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace

Waveform decode_wav(const std::vector<unsigned char>& bytes, int expected_rate) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("wav: not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) throw DataError("wav: chunk extends past end of file");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("wav: fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      std::uint16_t format = u16(f);
      if (format == 0xFFFE && size >= 40) format = u16(f + 24);  // extensible: subformat GUID
      if (format != 1) throw DataError("wav: unsupported codec " + std::to_string(format) + " (PCM only)");
      channels = u16(f + 2);
      rate = u32(f + 4);
      bits = u16(f + 14);
      if (bits != 16) throw DataError("wav: unsupported bit depth " + std::to_string(bits) + " (16-bit only)");
      if (channels != 1 && channels != 2)
        throw DataError("wav: unsupported channel count " + std::to_string(channels));
      if (rate == 0) throw DataError("wav: zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav: data chunk before fmt chunk");
      if (expected_rate > 0 && static_cast<int>(rate) != expected_rate)
        throw DataError("wav: sample rate " + std::to_string(rate) + " Hz does not match configured " +
                        std::to_string(expected_rate) + " Hz");
      const std::size_t frames = size / (2u * channels);
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(frames);
      const unsigned char* d = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        if (channels == 1) {
          w.samples[i] = static_cast<std::int16_t>(u16(d + 2 * i)) / 32768.0f;
        } else {
          const double l = static_cast<std::int16_t>(u16(d + 4 * i));
          const double r = static_cast<std::int16_t>(u16(d + 4 * i + 2));
          w.samples[i] = static_cast<float>((l + r) / 2.0 / 32768.0);
        }
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw DataError(have_fmt ? "wav: missing data chunk" : "wav: missing fmt chunk");
}

Waveform read_wav(const std::filesystem::path& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes, expected_rate);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_wav(const Waveform& w) {
  if (w.sample_rate <= 0) throw DataError("wav: sample rate must be positive");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(w.sample_rate));
  put32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (float s : w.samples) {
    if (!std::isfinite(s)) throw DataError("wav: non-finite sample");
    const double v = std::round(std::clamp(static_cast<double>(s), -1.0, 1.0) * 32768.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0))));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("wav: failed writing " + path.string());
}

}  // namespace avatr::audio
