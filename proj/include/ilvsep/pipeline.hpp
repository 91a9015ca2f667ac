#pragma once

#include "ilvsep/assign.hpp"
#include "ilvsep/bsseval.hpp"
#include "ilvsep/commonsep.hpp"
#include "ilvsep/ilvs.hpp"
#include "ilvsep/transform.hpp"
#include "ilvsep/vonmises.hpp"
#include "ilvsep/wavio.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ilvsep {

struct PipelineConfig {
  int frame_len = 1024;
  std::string layout;                 ///< empty: inferred from the channel count
  std::vector<int> custom_channels;   ///< spatial order for a custom layout

  struct Gmm {
    int k = 4;
    double d_sigma = 2.0;
    CommonGate gate;
    bool weighted = false;
    std::vector<double> init_means;   ///< empty: ideal R values of the layout
  } gmm;

  struct Vmm {
    int components = 0;               ///< 0 selects the order by BIC
    int min_components = 1;
    int max_components = 0;           ///< 0: twice the separable channel count
    std::uint64_t seed = 0;
    double tol = 1e-6;
    double m_cap = kDefaultConcentrationCap;
    bool weighted = false;
    std::size_t max_fit_samples = 100000;
    std::size_t max_select_samples = 20000;
    /// Components whose assigned bins carry less energy than this, relative to
    /// the strongest component, are removed and their bins re-routed. >= 0 disables.
    double min_energy_db = -40.0;
  } vmm;

  AssignOptions assign;

  /// Range checks; throws ConfigError.
  void validate() const;
};

PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& c);

/// GMM initial means at the one/two/three/all-channel ideal R values.
std::vector<double> default_gmm_init(const ChannelLayout& layout, int k);

ChannelLayout resolve_layout(const PipelineConfig& config, int channel_count);

struct SeparationResult {
  ChannelLayout layout;
  TfTensor tf;
  IlvsField field;
  Gmm1d gmm;
  CommonBand band;
  CommonPartition partition;
  std::optional<CommonSubtraction> subtraction;
  std::optional<VonMisesMixture> mixture;
  std::optional<ModelOrderSelection> selection;
  AssignmentMap map;
  Eigen::VectorXd common_stem;             ///< empty when no common signal was found
  std::vector<Eigen::VectorXd> object_stems;
  MultichannelAudio noncommon;             ///< input with the common part removed
  std::vector<std::string> warnings;
};

/// Full chain: MDCT, loudness vector sum, common detection and time-domain
/// removal, von-Mises clustering, per-component channel summation.
SeparationResult separate(const MultichannelAudio& audio, const PipelineConfig& config);

/// Non-silent R values (optionally with loudness weights) that feed the GMM.
void collect_r_samples(const IlvsField& field, std::vector<double>& r, std::vector<double>* weights);

nlohmann::json to_json(const Gmm1d& g);
nlohmann::json to_json(const CommonBand& b);
nlohmann::json to_json(const VonMisesMixture& m);
nlohmann::json to_json(const AssignmentMap& m);
nlohmann::json to_json(const EvalReport& r);
nlohmann::json separation_metadata(const SeparationResult& r, const PipelineConfig& config);

/// CSV rows: stem,ref,SDR,SIR,SAR followed by the averaged non-common row.
std::string eval_report_csv(const EvalReport& r);

}  // namespace ilvsep
