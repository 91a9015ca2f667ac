// ilvsep: multichannel loudness-vector-sum source separation.
//
//   ilvsep mix      scenario.json --out DIR
//   ilvsep separate mixture.wav   --out DIR [--config cfg.json] [--seed N] [--frame-len N] [--components N|auto]
//   ilvsep eval     ESTIMATE_DIR  manifest.json [--out DIR]
//   ilvsep inspect  mixture.wav   --what r_hist|angle_hist|gmm|vmm [--out DIR]

#include "ilvsep/error.hpp"
#include "ilvsep/mixgen.hpp"
#include "ilvsep/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> frame_len;
  std::string components;
};

void add_pipeline_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Pipeline config (JSON)");
  cmd->add_option("--seed", f.seed, "Seed for the von-Mises initialisation");
  cmd->add_option("--frame-len", f.frame_len, "MDCT frame length (hop) in samples");
  cmd->add_option("--components", f.components, "Number of object components, or 'auto'");
}

ilvsep::PipelineConfig load_config(const CommonFlags& f) {
  json j = json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ilvsep::ConfigError("cannot open config: " + f.config_path);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ilvsep::ConfigError(f.config_path + ": " + e.what());
    }
  }
  ilvsep::PipelineConfig c = ilvsep::config_from_json(j);
  if (f.seed) c.vmm.seed = *f.seed;
  if (f.frame_len) c.frame_len = *f.frame_len;
  if (!f.components.empty()) {
    if (f.components == "auto") {
      c.vmm.components = 0;
    } else {
      try {
        c.vmm.components = std::stoi(f.components);
      } catch (const std::exception&) {
        throw ilvsep::ConfigError("--components must be an integer or 'auto'");
      }
    }
  }
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ilvsep::Error("cannot write " + path.string());
  out << text;
}

void warn_all(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int run_mix(const std::string& scenario_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  ilvsep::Scenario s = ilvsep::load_scenario(scenario_path);
  if (seed) s.seed = *seed;
  const ilvsep::RenderedScenario r = ilvsep::render_scenario(s);
  if (r.normalization_gain < 1.0) {
    std::cerr << "warning: mixture exceeded -0.1 dBFS; all signals scaled by " << r.normalization_gain << "\n";
  }
  ilvsep::write_rendered(r, out_dir);
  std::cout << "wrote mixture.wav, " << r.references.size() << " source reference(s)"
            << (r.common_reference.size() > 0 ? ", ref_common.wav" : "") << " and manifest.json to " << out_dir
            << "\n";
  return 0;
}

int run_separate(const std::string& input, const std::string& out_dir, const CommonFlags& flags) {
  const ilvsep::PipelineConfig config = load_config(flags);
  const ilvsep::MultichannelAudio audio = ilvsep::read_wav(input);
  const ilvsep::SeparationResult r = ilvsep::separate(audio, config);
  warn_all(r.warnings);

  fs::create_directories(out_dir);
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("object_", 0) == 0 && entry.path().extension() == ".wav") fs::remove(entry.path());
  }
  if (r.common_stem.size() > 0) {
    ilvsep::write_stem_wav(fs::path(out_dir) / "common.wav", r.common_stem, audio.sample_rate);
  } else {
    fs::remove(fs::path(out_dir) / "common.wav");
  }
  for (std::size_t k = 0; k < r.object_stems.size(); ++k) {
    ilvsep::write_stem_wav(fs::path(out_dir) / ("object_" + std::to_string(k) + ".wav"), r.object_stems[k],
                           audio.sample_rate);
  }
  ilvsep::write_wav(fs::path(out_dir) / "noncommon.wav", r.noncommon, ilvsep::BitDepth::Float32);
  write_text(fs::path(out_dir) / "metadata.json", ilvsep::separation_metadata(r, config).dump(2) + "\n");
  std::cout << (r.common_stem.size() > 0 ? "common stem + " : "no common stem, ") << r.object_stems.size()
            << " object stem(s) written to " << out_dir << "\n";
  return 0;
}

int run_eval(const std::string& estimate_dir, const std::string& manifest_path, std::string out_dir) {
  std::ifstream in(manifest_path);
  if (!in) throw ilvsep::Error("cannot open manifest: " + manifest_path);
  const json manifest = json::parse(in);
  const fs::path ref_dir = fs::path(manifest_path).parent_path();
  if (out_dir.empty()) out_dir = estimate_dir;

  std::vector<ilvsep::NamedSignal> refs;
  for (const auto& s : manifest.at("sources")) {
    refs.push_back({s.at("name").get<std::string>(), ilvsep::read_stem_wav(ref_dir / s.at("file").get<std::string>())});
  }
  std::optional<ilvsep::NamedSignal> common_ref;
  if (manifest.contains("common")) {
    const auto& c = manifest.at("common");
    common_ref = ilvsep::NamedSignal{c.at("name").get<std::string>(),
                                     ilvsep::read_stem_wav(ref_dir / c.at("file").get<std::string>())};
  }

  std::vector<ilvsep::NamedSignal> estimates;
  for (int k = 0;; ++k) {
    const fs::path p = fs::path(estimate_dir) / ("object_" + std::to_string(k) + ".wav");
    if (!fs::exists(p)) break;
    estimates.push_back({p.filename().string(), ilvsep::read_stem_wav(p)});
  }
  std::optional<ilvsep::NamedSignal> common_est;
  const fs::path common_path = fs::path(estimate_dir) / "common.wav";
  if (fs::exists(common_path)) common_est = ilvsep::NamedSignal{"common.wav", ilvsep::read_stem_wav(common_path)};
  if (estimates.empty() && !common_est) throw ilvsep::Error("no estimate stems found in " + estimate_dir);

  const ilvsep::EvalReport report = ilvsep::evaluate(estimates, common_est ? &*common_est : nullptr, refs,
                                                     common_ref ? &*common_ref : nullptr);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "report.json", ilvsep::to_json(report).dump(2) + "\n");
  const std::string csv = ilvsep::eval_report_csv(report);
  write_text(fs::path(out_dir) / "report.csv", csv);
  std::cout << csv;
  for (const auto& s : report.spurious) std::cerr << "warning: spurious estimate " << s << "\n";
  for (const auto& m : report.missed) std::cerr << "warning: missed reference " << m << "\n";
  return 0;
}

std::string histogram_csv(const std::vector<double>& values, double lo, double hi, int bins) {
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1;
  }
  std::ostringstream os;
  os.precision(10);
  os << "bin_center,count\n";
  for (int b = 0; b < bins; ++b) os << lo + (b + 0.5) * (hi - lo) / bins << "," << counts[static_cast<std::size_t>(b)] << "\n";
  return os.str();
}

int run_inspect(const std::string& input, const std::string& what, const std::string& out_dir, int bins,
                const CommonFlags& flags) {
  const ilvsep::PipelineConfig config = load_config(flags);
  const ilvsep::MultichannelAudio audio = ilvsep::read_wav(input);
  std::string text, filename;
  if (what == "r_hist" || what == "angle_hist" || what == "gmm") {
    const ilvsep::ChannelLayout layout = ilvsep::resolve_layout(config, static_cast<int>(audio.num_channels()));
    const ilvsep::IlvsField field = ilvsep::compute_ilvs(ilvsep::mdct_forward(audio, config.frame_len), layout);
    std::vector<double> r;
    ilvsep::collect_r_samples(field, r, nullptr);
    if (what == "r_hist") {
      text = histogram_csv(r, 0.0, 1.0, bins);
      filename = "r_hist.csv";
    } else if (what == "angle_hist") {
      std::vector<double> angles;
      for (Eigen::Index t = 0; t < field.num_frames(); ++t) {
        for (Eigen::Index f = 0; f < field.num_bins(); ++f) {
          if (!field.silent(f, t) && !field.directionless(f, t)) angles.push_back(field.angle(f, t));
        }
      }
      text = histogram_csv(angles, 0.0, 2.0 * std::numbers::pi, bins);
      filename = "angle_hist.csv";
    } else {
      const auto init = config.gmm.init_means.empty() ? ilvsep::default_gmm_init(layout, config.gmm.k)
                                                      : config.gmm.init_means;
      const ilvsep::Gmm1d gmm = ilvsep::fit_gmm1d(r, config.gmm.k, init);
      json j = ilvsep::to_json(gmm);
      j["common_band"] = ilvsep::to_json(ilvsep::detect_common_band(gmm, config.gmm.d_sigma, config.gmm.gate));
      text = j.dump(2) + "\n";
      filename = "gmm.json";
    }
  } else if (what == "vmm") {
    const ilvsep::SeparationResult r = ilvsep::separate(audio, config);
    warn_all(r.warnings);
    if (!r.mixture) throw ilvsep::Error("no von-Mises mixture could be fitted");
    text = ilvsep::to_json(*r.mixture).dump(2) + "\n";
    filename = "vmm.json";
  } else {
    throw ilvsep::ConfigError("unknown --what: " + what + " (expected r_hist, angle_hist, gmm or vmm)");
  }
  if (out_dir.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / filename, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multichannel source separation by inter-channel loudness vector sum"};
  app.require_subcommand(1);

  std::string scenario, mix_out;
  std::optional<std::uint64_t> mix_seed;
  auto* mix = app.add_subcommand("mix", "Render a synthetic scenario with ground-truth stems");
  mix->add_option("scenario", scenario, "Scenario JSON")->required();
  mix->add_option("--out", mix_out, "Output directory")->required();
  mix->add_option("--seed", mix_seed, "Override the scenario seed");

  std::string sep_in, sep_out;
  CommonFlags sep_flags;
  auto* sep = app.add_subcommand("separate", "Separate a 5.1/7.1 mixture into common and object stems");
  sep->add_option("mixture", sep_in, "Multichannel WAV")->required();
  sep->add_option("--out", sep_out, "Output directory")->required();
  add_pipeline_flags(sep, sep_flags);

  std::string eval_dir, eval_manifest, eval_out;
  auto* ev = app.add_subcommand("eval", "Score separated stems against the scenario references");
  ev->add_option("estimates", eval_dir, "Directory written by 'separate'")->required();
  ev->add_option("manifest", eval_manifest, "manifest.json written by 'mix'")->required();
  ev->add_option("--out", eval_out, "Report directory (default: the estimate directory)");

  std::string insp_in, insp_what, insp_out;
  int insp_bins = 0;
  CommonFlags insp_flags;
  auto* insp = app.add_subcommand("inspect", "Dump R/angle histograms or fitted models");
  insp->add_option("mixture", insp_in, "Multichannel WAV")->required();
  insp->add_option("--what", insp_what, "r_hist | angle_hist | gmm | vmm")->required();
  insp->add_option("--out", insp_out, "Output directory (default: stdout)");
  insp->add_option("--bins", insp_bins, "Histogram bins (default 100 for R, 360 for angle)");
  add_pipeline_flags(insp, insp_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*mix) return run_mix(scenario, mix_out, mix_seed);
    if (*sep) return run_separate(sep_in, sep_out, sep_flags);
    if (*ev) return run_eval(eval_dir, eval_manifest, eval_out);
    if (*insp) {
      const int bins = insp_bins > 0 ? insp_bins : (insp_what == "angle_hist" ? 360 : 100);
      return run_inspect(insp_in, insp_what, insp_out, bins, insp_flags);
    }
  } catch (const ilvsep::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
