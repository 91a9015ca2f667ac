#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ilvsep {

/// Multichannel PCM buffer. One row per channel, one column per sample frame,
/// nominal range [-1, 1].
struct MultichannelAudio {
  int sample_rate = 48000;
  Eigen::MatrixXd channels;
  std::string layout_name = "custom";

  Eigen::Index num_channels() const { return channels.rows(); }
  Eigen::Index num_samples() const { return channels.cols(); }
};

enum class BitDepth { Pcm16, Pcm24, Float32 };

struct WriteStats {
  std::size_t clip_count = 0;
};

/// Geometry of the channels taking part in the loudness vector sum.
///
/// `separable_indices` lists source-file channel indices in spatial (circular)
/// order, so that index-adjacent entries are physically adjacent loudspeakers.
/// Entry i sits on the axis at angle i * theta_v.
struct ChannelLayout {
  std::string name;
  int file_channels = 0;
  std::vector<int> separable_indices;
  std::vector<int> excluded_indices;
  std::vector<double> axis_angle_rad;
  double theta_v = 0.0;

  int size() const { return static_cast<int>(separable_indices.size()); }
  /// Circular index arithmetic on the separable list.
  int wrap(int i) const {
    const int n = size();
    return ((i % n) + n) % n;
  }
};

MultichannelAudio read_wav(const std::filesystem::path& path);

/// Mono (or first-channel) reader for reference and estimate stems.
Eigen::VectorXd read_stem_wav(const std::filesystem::path& path, int* sample_rate = nullptr);

/// Writes RIFF/WAVE. Integer depths clip to [-1, 1] before quantization.
WriteStats write_wav(const std::filesystem::path& path, const MultichannelAudio& audio,
                     BitDepth depth = BitDepth::Float32);

WriteStats write_stem_wav(const std::filesystem::path& path, const Eigen::VectorXd& signal, int sample_rate,
                          BitDepth depth = BitDepth::Float32);

/// Built-in layouts use SMPTE interleave order L R C LFE Ls Rs [Lb Rb].
/// "5.1" circles L, R, Rs, Ls; "7.1" circles L, R, Rs, Rb, Lb, Ls.
/// Center and LFE are excluded from the vector sum.
ChannelLayout layout_for(const std::string& name, int channel_count);

/// Custom layout from an explicit spatial ordering of file channels.
ChannelLayout layout_custom(std::vector<int> separable_indices, int channel_count);

/// Picks "5.1" for 6 channels, "7.1" for 8, otherwise every channel in file order.
ChannelLayout default_layout(int channel_count);

}  // namespace ilvsep
