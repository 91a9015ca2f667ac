#include "ilvsep/pipeline.hpp"

#include "ilvsep/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <type_traits>

namespace ilvsep {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& target) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!j.at(key).is_number_integer()) throw ConfigError(std::string("config key \"") + key + "\": expected an integer");
  }
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Deterministic stride subsample.
std::vector<double> thin(const std::vector<double>& x, std::size_t cap) {
  if (cap == 0 || x.size() <= cap) return x;
  const std::size_t stride = (x.size() + cap - 1) / cap;
  std::vector<double> out;
  out.reserve(x.size() / stride + 1);
  for (std::size_t i = 0; i < x.size(); i += stride) out.push_back(x[i]);
  return out;
}

std::string format_db(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void PipelineConfig::validate() const {
  if (frame_len < 64 || frame_len % 2 != 0) throw ConfigError("frame_len must be even and >= 64");
  if (gmm.k < 1 || gmm.k > 16) throw ConfigError("gmm.k must be in [1, 16]");
  if (!(gmm.d_sigma > 0.0)) throw ConfigError("gmm.d_sigma must be positive");
  if (!gmm.init_means.empty() && static_cast<int>(gmm.init_means.size()) != gmm.k) {
    throw ConfigError("gmm.init_means needs k entries");
  }
  if (!(gmm.gate.max_mean > 0.0 && gmm.gate.max_mean <= 1.0)) throw ConfigError("gmm.max_mean must be in (0, 1]");
  if (!(gmm.gate.min_weight >= 0.0 && gmm.gate.min_weight < 1.0)) throw ConfigError("gmm.min_weight must be in [0, 1)");
  if (vmm.components < 0) throw ConfigError("vmm.components must be >= 0 (0 = auto)");
  if (vmm.min_components < 1) throw ConfigError("vmm.min_components must be >= 1");
  if (vmm.max_components != 0 && vmm.max_components < vmm.min_components) {
    throw ConfigError("vmm.max_components must be >= min_components");
  }
  if (!(vmm.tol > 0.0)) throw ConfigError("vmm.tol must be positive");
  if (!(vmm.m_cap > 0.0 && vmm.m_cap <= 1e4)) throw ConfigError("vmm.m_cap must be in (0, 1e4]");
  if (!layout.empty() && layout != "5.1" && layout != "7.1" && layout != "custom") {
    throw ConfigError("layout must be 5.1, 7.1 or custom");
  }
  if (layout == "custom" && custom_channels.size() < 2) throw ConfigError("custom layout needs channels");
}

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  read_opt(j, "frame_len", c.frame_len);
  read_opt(j, "layout", c.layout);
  read_opt(j, "custom_channels", c.custom_channels);
  if (j.contains("gmm")) {
    const json& g = j.at("gmm");
    read_opt(g, "k", c.gmm.k);
    read_opt(g, "d_sigma", c.gmm.d_sigma);
    read_opt(g, "max_mean", c.gmm.gate.max_mean);
    read_opt(g, "min_weight", c.gmm.gate.min_weight);
    read_opt(g, "weighted", c.gmm.weighted);
    read_opt(g, "merge_near_zero", c.gmm.gate.merge_near_zero);
    read_opt(g, "init_means", c.gmm.init_means);
  }
  if (j.contains("vmm")) {
    const json& v = j.at("vmm");
    if (v.contains("components") && v.at("components").is_string()) {
      if (v.at("components") != "auto") throw ConfigError("vmm.components must be an integer or \"auto\"");
      c.vmm.components = 0;
    } else {
      read_opt(v, "components", c.vmm.components);
    }
    read_opt(v, "min_components", c.vmm.min_components);
    read_opt(v, "max_components", c.vmm.max_components);
    read_opt(v, "seed", c.vmm.seed);
    read_opt(v, "tol", c.vmm.tol);
    read_opt(v, "m_cap", c.vmm.m_cap);
    read_opt(v, "weighted", c.vmm.weighted);
    read_opt(v, "max_fit_samples", c.vmm.max_fit_samples);
    read_opt(v, "max_select_samples", c.vmm.max_select_samples);
    read_opt(v, "min_energy_db", c.vmm.min_energy_db);
  }
  if (j.contains("assign")) {
    const json& a = j.at("assign");
    read_opt(a, "axis_tol", c.assign.axis_tol);
    read_opt(a, "r_single_tol", c.assign.r_single_tol);
    read_opt(a, "merge_tol", c.assign.merge_tol);
  }
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["frame_len"] = c.frame_len;
  j["layout"] = c.layout.empty() ? json(nullptr) : json(c.layout);
  if (!c.custom_channels.empty()) j["custom_channels"] = c.custom_channels;
  j["gmm"] = {{"k", c.gmm.k},
              {"d_sigma", c.gmm.d_sigma},
              {"max_mean", c.gmm.gate.max_mean},
              {"min_weight", c.gmm.gate.min_weight},
              {"merge_near_zero", c.gmm.gate.merge_near_zero},
              {"weighted", c.gmm.weighted}};
  if (!c.gmm.init_means.empty()) j["gmm"]["init_means"] = c.gmm.init_means;
  j["vmm"] = {{"components", c.vmm.components == 0 ? json("auto") : json(c.vmm.components)},
              {"min_components", c.vmm.min_components},
              {"max_components", c.vmm.max_components},
              {"seed", c.vmm.seed},
              {"tol", c.vmm.tol},
              {"m_cap", c.vmm.m_cap},
              {"weighted", c.vmm.weighted},
              {"max_fit_samples", c.vmm.max_fit_samples},
              {"max_select_samples", c.vmm.max_select_samples},
              {"min_energy_db", c.vmm.min_energy_db}};
  j["assign"] = {{"axis_tol", c.assign.axis_tol}, {"r_single_tol", c.assign.r_single_tol}, {"merge_tol", c.assign.merge_tol}};
  return j;
}

std::vector<double> default_gmm_init(const ChannelLayout& layout, int k) {
  std::vector<double> ideal = {0.0, ideal_r(3, layout.theta_v), ideal_r(2, layout.theta_v), ideal_r(1, layout.theta_v)};
  std::sort(ideal.begin(), ideal.end());
  if (k == 4) return ideal;
  std::vector<double> out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = k == 1 ? 0.5 : static_cast<double>(j) / (k - 1);
  return out;
}

ChannelLayout resolve_layout(const PipelineConfig& config, int channel_count) {
  if (config.layout.empty()) {
    if (channel_count != 6 && channel_count != 8) {
      throw ConfigError("cannot infer a layout for " + std::to_string(channel_count) +
                        " channels; set layout to \"custom\" with custom_channels");
    }
    return default_layout(channel_count);
  }
  if (config.layout == "custom") return layout_custom(config.custom_channels, channel_count);
  return layout_for(config.layout, channel_count);
}

void collect_r_samples(const IlvsField& field, std::vector<double>& r, std::vector<double>* weights) {
  r.clear();
  if (weights != nullptr) weights->clear();
  for (Eigen::Index t = 0; t < field.num_frames(); ++t) {
    for (Eigen::Index f = 0; f < field.num_bins(); ++f) {
      if (field.silent(f, t)) continue;
      r.push_back(field.r_value(f, t));
      if (weights != nullptr) weights->push_back(field.loudness_sum(f, t));
    }
  }
}

SeparationResult separate(const MultichannelAudio& audio, const PipelineConfig& config) {
  config.validate();
  SeparationResult out;
  out.layout = resolve_layout(config, static_cast<int>(audio.num_channels()));
  const ChannelLayout& layout = out.layout;
  const int n_sep = layout.size();

  out.tf = mdct_forward(audio, config.frame_len);
  out.field = compute_ilvs(out.tf, layout);

  // Common signal: GMM on R, leftmost component, Eq. (4)-(6) style removal.
  std::vector<double> r_samples, r_weights;
  collect_r_samples(out.field, r_samples, config.gmm.weighted ? &r_weights : nullptr);
  if (r_samples.empty()) throw Error("input is silent");
  std::vector<double> init =
      config.gmm.init_means.empty() ? default_gmm_init(layout, config.gmm.k) : config.gmm.init_means;
  // A field with fewer distinct R values than components (e.g. one source on
  // one channel) cannot support k components.
  std::vector<double> distinct;
  for (double v : r_samples) {
    if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) distinct.push_back(v);
    if (static_cast<int>(distinct.size()) >= config.gmm.k) break;
  }
  if (static_cast<int>(distinct.size()) < config.gmm.k) {
    std::sort(distinct.begin(), distinct.end());
    init = distinct;
    out.warnings.push_back("only " + std::to_string(distinct.size()) + " distinct R value(s); GMM reduced to " +
                           std::to_string(distinct.size()) + " component(s)");
  }
  out.gmm = fit_gmm1d(r_samples, static_cast<int>(init.size()), init, r_weights);
  out.band = detect_common_band(out.gmm, config.gmm.d_sigma, config.gmm.gate);
  out.partition = split_common(out.tf, layout, out.field, out.band);

  Eigen::MatrixXd x_org(n_sep, audio.num_samples());
  for (int i = 0; i < n_sep; ++i) x_org.row(i) = audio.channels.row(layout.separable_indices[i]);
  out.noncommon = audio;
  if (out.band.present) {
    try {
      out.subtraction = subtract_common(x_org, out.partition.common, average_common(out.partition.common),
                                        config.frame_len);
    } catch (const Error& e) {
      out.warnings.push_back(std::string("common band found but ") + e.what() + "; skipping common removal");
      out.band.present = false;
      out.partition = split_common(out.tf, layout, out.field, out.band);
    }
  }
  if (out.subtraction) {
    out.common_stem = out.subtraction->common_avg_time;
    for (int i = 0; i < n_sep; ++i) {
      out.noncommon.channels.row(layout.separable_indices[i]) = out.subtraction->noncommon_time.row(i);
    }
  }

  // Object clustering on the directions of the remaining bins.
  const BoolGrid eligible = (!out.partition.common_mask) && (!out.field.silent) && (!out.field.directionless);
  std::vector<double> angles, angle_weights;
  for (Eigen::Index t = 0; t < out.field.num_frames(); ++t) {
    for (Eigen::Index f = 0; f < out.field.num_bins(); ++f) {
      if (!eligible(f, t)) continue;
      angles.push_back(out.field.angle(f, t));
      angle_weights.push_back(out.field.magnitude(f, t));
    }
  }
  if (!config.vmm.weighted) angle_weights.clear();

  VmOptions vm_opt;
  vm_opt.tol = config.vmm.tol;
  vm_opt.m_cap = config.vmm.m_cap;

  const std::vector<double> fit_angles = thin(angles, config.vmm.max_fit_samples);
  const std::vector<double> fit_weights = thin(angle_weights, config.vmm.max_fit_samples);
  const int feasible = static_cast<int>(fit_angles.size() / 10);
  int order = config.vmm.components;
  if (order == 0) {
    const std::vector<double> sel_angles = thin(angles, config.vmm.max_select_samples);
    const std::vector<double> sel_weights = thin(angle_weights, config.vmm.max_select_samples);
    int hi_cap = std::min(config.vmm.max_components > 0 ? config.vmm.max_components : 2 * n_sep,
                          static_cast<int>(sel_angles.size() / 10));
    std::vector<double> distinct;
    for (double a : sel_angles) {
      if (static_cast<int>(distinct.size()) >= hi_cap) break;
      if (std::find(distinct.begin(), distinct.end(), a) == distinct.end()) distinct.push_back(a);
    }
    hi_cap = std::min(hi_cap, static_cast<int>(distinct.size()));
    if (hi_cap >= config.vmm.min_components) {
      out.selection = select_model_order(sel_angles, config.vmm.min_components, hi_cap, config.vmm.seed, vm_opt,
                                         sel_weights);
      order = out.selection->best;
    }
  }
  if (order == 0 || order > feasible) {
    out.warnings.push_back("only " + std::to_string(angles.size()) +
                           " directional non-common bins; no object stems extracted");
    out.map.component = Eigen::MatrixXi::Constant(out.field.num_bins(), out.field.num_frames(), -1);
    return out;
  }

  out.mixture = fit_vm_mixture(fit_angles, order, config.vmm.seed, vm_opt, fit_weights);
  for (std::size_t j = 0; j < out.mixture->degenerate.size(); ++j) {
    if (out.mixture->degenerate[j]) {
      out.warnings.push_back("von-Mises component " + std::to_string(j) + " reached the concentration cap");
    }
  }
  if (out.mixture->dropped > 0) {
    out.warnings.push_back(std::to_string(out.mixture->dropped) + " von-Mises component(s) dropped for low weight");
  }

  out.map = assign_bins(out.field, *out.mixture, eligible);
  if (config.vmm.min_energy_db < 0.0 && out.mixture->size() > 1) {
    const int k = out.mixture->size();
    Eigen::VectorXd energy = Eigen::VectorXd::Zero(k);
    for (Eigen::Index t = 0; t < out.field.num_frames(); ++t) {
      for (Eigen::Index f = 0; f < out.field.num_bins(); ++f) {
        const int c = out.map.component(f, t);
        if (c < 0) continue;
        for (const auto& g : out.partition.noncommon) energy[c] += g(f, t) * g(f, t);
      }
    }
    const double floor = energy.maxCoeff() * std::pow(10.0, config.vmm.min_energy_db / 10.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (energy[j] >= floor) keep.push_back(j);
    }
    if (static_cast<int>(keep.size()) < k) {
      out.warnings.push_back(std::to_string(k - static_cast<int>(keep.size())) +
                             " von-Mises component(s) removed for negligible energy");
      VonMisesMixture& m = *out.mixture;
      const auto n = static_cast<Eigen::Index>(keep.size());
      VonMisesMixture reduced = m;
      reduced.weights.resize(n);
      reduced.means.resize(n);
      reduced.concentrations.resize(n);
      reduced.degenerate.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        reduced.weights[j] = m.weights[keep[static_cast<std::size_t>(j)]];
        reduced.means[j] = m.means[keep[static_cast<std::size_t>(j)]];
        reduced.concentrations[j] = m.concentrations[keep[static_cast<std::size_t>(j)]];
        reduced.degenerate.push_back(m.degenerate[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])]);
      }
      reduced.weights /= reduced.weights.sum();
      reduced.dropped += k - static_cast<int>(n);
      reduced.log_likelihood = vm_mixture_log_likelihood(reduced, fit_angles, fit_weights);
      m = std::move(reduced);
      out.map = assign_bins(out.field, m, eligible);
    }
  }
  attach_rules(out.map, layout, config.assign);
  out.object_stems =
      reconstruct_sources(out.partition.noncommon, out.map, config.frame_len, audio.num_samples());
  return out;
}

json to_json(const Gmm1d& g) {
  return {{"weights", to_std(g.weights)},
          {"means", to_std(g.means)},
          {"variances", to_std(g.variances)},
          {"log_likelihood", g.log_likelihood},
          {"iterations", g.iterations}};
}

json to_json(const CommonBand& b) {
  return {{"mu_r", b.mu_r}, {"d", b.d}, {"weight", b.weight}, {"components", b.components}, {"present", b.present}};
}

json to_json(const VonMisesMixture& m) {
  return {{"weights", to_std(m.weights)},
          {"means_rad", to_std(m.means)},
          {"concentrations", to_std(m.concentrations)},
          {"log_likelihood", m.log_likelihood}};
}

json to_json(const AssignmentMap& m) {
  json arr = json::array();
  for (const auto& c : m.components) {
    arr.push_back({{"mean_angle_rad", c.mean_angle},
                   {"mean_r", c.mean_r},
                   {"rule", c.rule.to_string()},
                   {"bin_count", c.bin_count},
                   {"weight", c.weight}});
  }
  return arr;
}

json to_json(const EvalReport& r) {
  json rows = json::array();
  for (const auto& s : r.rows) {
    rows.push_back({{"stem", s.stem},
                    {"ref", s.reference},
                    {"common", s.common},
                    {"SDR", s.metrics.sdr},
                    {"SIR", s.metrics.sir},
                    {"SAR", s.metrics.sar}});
  }
  return {{"rows", rows},
          {"noncommon_average",
           {{"count", r.noncommon_count}, {"SDR", r.noncommon_mean.sdr}, {"SIR", r.noncommon_mean.sir}, {"SAR", r.noncommon_mean.sar}}},
          {"spurious", r.spurious},
          {"missed", r.missed}};
}

std::string eval_report_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "stem,ref,SDR,SIR,SAR\n";
  for (const auto& s : r.rows) {
    os << s.stem << "," << s.reference << "," << format_db(s.metrics.sdr) << "," << format_db(s.metrics.sir) << ","
       << format_db(s.metrics.sar) << "\n";
  }
  os << "noncommon_average,," << format_db(r.noncommon_mean.sdr) << "," << format_db(r.noncommon_mean.sir) << ","
     << format_db(r.noncommon_mean.sar) << "\n";
  return os.str();
}

json separation_metadata(const SeparationResult& r, const PipelineConfig& config) {
  json j;
  j["config"] = config_to_json(config);
  j["layout"] = {{"name", r.layout.name},
                 {"separable_indices", r.layout.separable_indices},
                 {"excluded_indices", r.layout.excluded_indices},
                 {"theta_v", r.layout.theta_v}};
  j["gmm"] = to_json(r.gmm);
  j["common_band"] = to_json(r.band);
  j["common_gains"] = r.subtraction ? json(to_std(r.subtraction->gains)) : json(nullptr);
  j["vmm"] = r.mixture ? to_json(*r.mixture) : json(nullptr);
  if (r.selection) {
    j["model_order"] = {{"orders", r.selection->orders}, {"bic", r.selection->bic}, {"best", r.selection->best}};
  }
  j["assignment"] = to_json(r.map);
  j["warnings"] = r.warnings;
  j["common_stem"] = r.common_stem.size() > 0 ? json("common.wav") : json(nullptr);
  json stems = json::array();
  for (std::size_t k = 0; k < r.object_stems.size(); ++k) stems.push_back("object_" + std::to_string(k) + ".wav");
  j["object_stems"] = stems;
  return j;
}

}  // namespace ilvsep
