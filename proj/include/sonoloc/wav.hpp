#pragma once

#include <string>
#include <vector>

namespace sonoloc {

struct WavData {
  double sample_rate = 0.0;
  std::vector<std::vector<double>> channels;  // [channel][sample]

  std::size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.
// Integer samples are scaled to [-1, 1); float samples pass through.
WavData read_wav(const std::string& path);

enum class WavFormat { kFloat32, kPcm16 };

// Writes all channels interleaved. 16-bit output clips to [-1, 1).
void write_wav(const std::string& path, const WavData& data,
               WavFormat format = WavFormat::kFloat32);

}  // namespace sonoloc
