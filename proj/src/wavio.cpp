#include "ilvsep/wavio.hpp"

#include "ilvsep/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

namespace ilvsep {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::uint32_t channel_mask(int channels) {
  switch (channels) {
    case 2: return 0x3;
    case 6: return 0x60F;   // L R C LFE Ls Rs (side)
    case 8: return 0x63F;   // FL FR FC LFE BL BR SL SR
    default: return 0;
  }
}

}  // namespace

namespace {

MultichannelAudio read_wav_impl(const std::filesystem::path& path, int min_channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw Error("truncated fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 40) throw Error("truncated WAVE_FORMAT_EXTENSIBLE chunk");
        format = le16(chunk + 8 + 24);  // first two bytes of the subformat GUID
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }

  if (format == 0) throw Error("missing fmt chunk");
  if (data == nullptr) throw Error("missing data chunk");
  const bool is_int = format == kFormatPcm && (bits == 16 || bits == 24);
  const bool is_float = format == kFormatFloat && bits == 32;
  if (!is_int && !is_float) {
    throw Error("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bit)");
  }
  if (channels < min_channels) {
    throw Error(min_channels == 2 ? "channel count < 2" : "WAV file has no channels");
  }
  if (rate == 0) throw Error("sample rate must be positive");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  MultichannelAudio audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.channels.resize(channels, static_cast<Eigen::Index>(frames));
  const unsigned char* p = data;
  for (std::size_t t = 0; t < frames; ++t) {
    for (int c = 0; c < channels; ++c, p += width) {
      double v = 0.0;
      if (is_float) {
        float f;
        const std::uint32_t u = le32(p);
        std::memcpy(&f, &u, sizeof f);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        std::int32_t s = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) | (std::int32_t(p[2]) << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      }
      audio.channels(c, static_cast<Eigen::Index>(t)) = v;
    }
  }
  audio.layout_name = channels == 6 ? "5.1" : channels == 8 ? "7.1" : "custom";
  return audio;
}

}  // namespace

MultichannelAudio read_wav(const std::filesystem::path& path) { return read_wav_impl(path, 2); }

Eigen::VectorXd read_stem_wav(const std::filesystem::path& path, int* sample_rate) {
  MultichannelAudio audio = read_wav_impl(path, 1);
  if (sample_rate != nullptr) *sample_rate = audio.sample_rate;
  return audio.channels.row(0).transpose();
}

WriteStats write_stem_wav(const std::filesystem::path& path, const Eigen::VectorXd& signal, int sample_rate,
                          BitDepth depth) {
  MultichannelAudio audio;
  audio.sample_rate = sample_rate;
  audio.channels = signal.transpose();
  return write_wav(path, audio, depth);
}

WriteStats write_wav(const std::filesystem::path& path, const MultichannelAudio& audio,
                     BitDepth depth) {
  if (audio.num_channels() == 0) throw Error("cannot write WAV with no channels");
  if (audio.sample_rate <= 0) throw Error("sample rate must be positive");

  const int channels = static_cast<int>(audio.num_channels());
  const std::uint16_t bits = depth == BitDepth::Pcm16 ? 16 : depth == BitDepth::Pcm24 ? 24 : 32;
  const std::uint16_t base_format = depth == BitDepth::Float32 ? kFormatFloat : kFormatPcm;
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(audio.num_samples()) * block_align;
  const bool extensible = channels > 2;

  std::vector<unsigned char> out;
  out.reserve(data_size + 80);
  put_tag(out, "RIFF");
  put32(out, 0);  // patched below
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, extensible ? 40 : 16);
  put16(out, extensible ? kFormatExtensible : base_format);
  put16(out, static_cast<std::uint16_t>(channels));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put32(out, static_cast<std::uint32_t>(audio.sample_rate) * block_align);
  put16(out, block_align);
  put16(out, bits);
  if (extensible) {
    // KSDATAFORMAT_SUBTYPE_{PCM,IEEE_FLOAT}: xxxx0000-0000-0010-8000-00aa00389b71
    static constexpr std::array<unsigned char, 14> kGuidTail = {
        0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    put16(out, 22);
    put16(out, bits);
    put32(out, channel_mask(channels));
    put16(out, base_format);
    out.insert(out.end(), kGuidTail.begin(), kGuidTail.end());
  }
  put_tag(out, "data");
  put32(out, data_size);

  WriteStats stats;
  for (Eigen::Index t = 0; t < audio.num_samples(); ++t) {
    for (int c = 0; c < channels; ++c) {
      const double v = audio.channels(c, t);
      if (depth == BitDepth::Float32) {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof u);
        put32(out, u);
        continue;
      }
      double clipped = v;
      if (v > 1.0 || v < -1.0 || std::isnan(v)) {
        ++stats.clip_count;
        clipped = std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0);
      }
      if (depth == BitDepth::Pcm16) {
        const long q = std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        const long q = std::clamp(std::lround(clipped * 8388608.0), -8388608L, 8388607L);
        const auto u = static_cast<std::uint32_t>(q);
        out.push_back(u & 0xFF);
        out.push_back((u >> 8) & 0xFF);
        out.push_back((u >> 16) & 0xFF);
      }
    }
  }
  const std::uint32_t riff_size = static_cast<std::uint32_t>(out.size() - 8);
  for (int i = 0; i < 4; ++i) out[4 + i] = (riff_size >> (8 * i)) & 0xFF;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write WAV file: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed: " + path.string());
  return stats;
}

ChannelLayout layout_custom(std::vector<int> separable_indices, int channel_count) {
  if (separable_indices.size() < 2) throw ConfigError("layout needs at least 2 separable channels");
  std::vector<bool> used(static_cast<std::size_t>(std::max(channel_count, 0)), false);
  for (int idx : separable_indices) {
    if (idx < 0 || idx >= channel_count) throw ConfigError("layout channel index out of range");
    if (used[idx]) throw ConfigError("layout lists a channel twice");
    used[idx] = true;
  }
  ChannelLayout layout;
  layout.name = "custom";
  layout.file_channels = channel_count;
  layout.separable_indices = std::move(separable_indices);
  for (int c = 0; c < channel_count; ++c) {
    if (!used[c]) layout.excluded_indices.push_back(c);
  }
  const int n = layout.size();
  layout.theta_v = 2.0 * std::numbers::pi / n;
  for (int i = 0; i < n; ++i) layout.axis_angle_rad.push_back(i * layout.theta_v);
  return layout;
}

ChannelLayout layout_for(const std::string& name, int channel_count) {
  ChannelLayout layout;
  if (name == "5.1") {
    if (channel_count != 6) throw ConfigError("channel count mismatch: 5.1 needs 6 channels");
    layout = layout_custom({0, 1, 5, 4}, 6);
  } else if (name == "7.1") {
    if (channel_count != 8) throw ConfigError("channel count mismatch: 7.1 needs 8 channels");
    layout = layout_custom({0, 1, 5, 7, 6, 4}, 8);
  } else {
    throw ConfigError("unknown layout: " + name);
  }
  layout.name = name;
  return layout;
}

ChannelLayout default_layout(int channel_count) {
  if (channel_count == 6) return layout_for("5.1", 6);
  if (channel_count == 8) return layout_for("7.1", 8);
  std::vector<int> all(static_cast<std::size_t>(channel_count));
  for (int c = 0; c < channel_count; ++c) all[c] = c;
  return layout_custom(std::move(all), channel_count);
}

}  // namespace ilvsep
