#pragma once

#include "ilvsep/wavio.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ilvsep {

/// Amplitude pan of one object. Channel numbers are positions on the layout circle.
struct PanSpec {
  enum class Kind { OneChannel, TwoChannel, ThreeChannel };
  Kind kind = Kind::OneChannel;
  int anchor = 0;
  double fraction = 0.5;                          ///< 2ch: 0 = anchor, 1 = second channel
  double center_gain = 0.70710678118654752440;    ///< 3ch: gain on the anchor
  std::vector<int> pair;                          ///< 2ch: explicit channels, must be adjacent
};

/// Synthetic or file-backed mono signal. Generated signals are scaled to `rms`.
struct SignalSpec {
  std::string type;  ///< noise_band | pink_noise | tones | chirp | sum | file
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  std::vector<double> freqs;
  std::vector<double> amps;
  double f0 = 0.0;
  double f1 = 0.0;
  double rms = 0.1;
  double burst_period = 0.0;  ///< seconds; 0 disables gating
  double burst_duty = 1.0;
  double burst_offset = 0.0;  ///< seconds
  std::string path;
  std::vector<SignalSpec> parts;
};

struct SourceSpec {
  std::string name;
  SignalSpec signal;
  PanSpec pan;
  double gain_db = 0.0;
};

struct CommonSpec {
  std::string name = "common";
  SignalSpec signal;
  std::vector<double> gains;  ///< per separable channel; empty means all 1
  double gain_db = 0.0;
};

struct Scenario {
  std::string layout_name = "5.1";
  int sample_rate = 48000;
  double duration = 10.0;
  std::uint64_t seed = 0;
  std::vector<SourceSpec> sources;
  std::vector<CommonSpec> common;  ///< zero or one entries
  std::filesystem::path base_dir;  ///< resolves relative stem paths
};

/// Parses and validates a scenario. Schema violations throw ConfigError naming the
/// offending JSON path.
Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& s);

/// Per separable channel gains of one pan. Sum of squares is 1.
Eigen::VectorXd pan_gains(const PanSpec& pan, const ChannelLayout& layout);

Eigen::VectorXd generate_signal(const SignalSpec& spec, int sample_rate, Eigen::Index length, std::uint64_t seed,
                                const std::filesystem::path& base_dir = {});

struct RenderedScenario {
  MultichannelAudio mixture;
  ChannelLayout layout;
  std::vector<Eigen::VectorXd> references;       ///< mono, pre-pan, per source
  std::vector<Eigen::MatrixXd> images;           ///< file-channel images, per source
  Eigen::VectorXd common_reference;               ///< empty without a common source
  Eigen::MatrixXd common_image;
  std::vector<Eigen::VectorXd> source_gains;     ///< per separable channel
  Eigen::VectorXd common_gains;
  double normalization_gain = 1.0;
  nlohmann::json manifest;
};

/// Renders the mixture. If its peak exceeds -0.1 dBFS all signals are scaled down
/// together so the mixture stays the exact sum of the rendered images.
RenderedScenario render_scenario(const Scenario& s);

/// Writes mixture.wav, ref_<name>.wav per source, ref_common.wav and manifest.json.
void write_rendered(const RenderedScenario& r, const std::filesystem::path& out_dir);

}  // namespace ilvsep
