#include "sonoloc/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sonoloc {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const unsigned char* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path);
  }

  std::uint16_t format = 0;
  std::uint16_t channel_count = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* samples = nullptr;
  std::size_t sample_bytes = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint32_t chunk_size = read_u32(data + pos + 4);
    const unsigned char* body = data + pos + 8;
    if (pos + 8 + chunk_size > size) {
      throw std::runtime_error("truncated wav chunk: " + path);
    }
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw std::runtime_error("malformed fmt chunk: " + path);
      format = read_u16(body);
      channel_count = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      if (format == kFormatExtensible && chunk_size >= 40) {
        // The sub-format GUID starts with the plain format code.
        format = read_u16(body + 24);
      }
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      samples = body;
      sample_bytes = chunk_size;
    }
    pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (channel_count == 0 || rate == 0) {
    throw std::runtime_error("wav file is missing a fmt chunk: " + path);
  }
  if (samples == nullptr) {
    throw std::runtime_error("wav file is missing a data chunk: " + path);
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    throw std::runtime_error("unsupported wav encoding (need 16-bit PCM or 32-bit float): " +
                             path);
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channel_count;
  const std::size_t frames = sample_bytes / frame_bytes;

  WavData out;
  out.sample_rate = rate;
  out.channels.assign(channel_count, std::vector<double>(frames, 0.0));
  for (std::size_t f = 0; f < frames; ++f) {
    const unsigned char* frame = samples + f * frame_bytes;
    for (std::size_t c = 0; c < channel_count; ++c) {
      const unsigned char* p = frame + c * bytes_per_sample;
      if (pcm16) {
        const std::int16_t v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        out.channels[c][f] = static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, sizeof v);
        out.channels[c][f] = static_cast<double>(v);
      }
    }
  }
  return out;
}

void write_wav(const std::string& path, const WavData& data, WavFormat format) {
  if (data.channels.empty()) throw std::runtime_error("wav output needs channels");
  const std::size_t frames = data.frames();
  for (const std::vector<double>& ch : data.channels) {
    if (ch.size() != frames) {
      throw std::runtime_error("wav channels must share one length");
    }
  }
  if (data.sample_rate <= 0.0) throw std::runtime_error("wav needs a sample rate");

  const std::uint16_t channel_count = static_cast<std::uint16_t>(data.channels.size());
  const std::uint16_t bits = format == WavFormat::kFloat32 ? 32 : 16;
  const std::uint16_t bytes_per_sample = bits / 8;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(data.sample_rate));
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(frames * channel_count * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  append_u32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  append_u32(out, 16);
  append_u16(out, format == WavFormat::kFloat32 ? kFormatFloat : kFormatPcm);
  append_u16(out, channel_count);
  append_u32(out, rate);
  append_u32(out, rate * channel_count * bytes_per_sample);
  append_u16(out, static_cast<std::uint16_t>(channel_count * bytes_per_sample));
  append_u16(out, bits);
  out.append("data");
  append_u32(out, data_bytes);

  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < channel_count; ++c) {
      const double v = data.channels[c][f];
      if (format == WavFormat::kFloat32) {
        const float fv = static_cast<float>(v);
        std::uint32_t word;
        std::memcpy(&word, &fv, sizeof word);
        append_u32(out, word);
      } else {
        const double clipped = std::clamp(v, -1.0, 32767.0 / 32768.0);
        append_u16(out, static_cast<std::uint16_t>(
                            static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
      }
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write wav file: " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("failed writing wav file: " + path);
}

}  // namespace sonoloc
