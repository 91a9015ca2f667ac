#include "ilvsep/mixgen.hpp"

#include "ilvsep/error.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

namespace ilvsep {
namespace {

using nlohmann::json;

constexpr double kHeadroomDb = -0.1;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw ConfigError("scenario " + where + ": " + what);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    schema_error(where + "." + key, e.what());
  }
}

PanSpec parse_pan(const json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "pan must be an object");
  PanSpec pan;
  const auto kind = get_or<std::string>(j, "kind", "", where);
  if (kind == "1ch") {
    pan.kind = PanSpec::Kind::OneChannel;
  } else if (kind == "2ch") {
    pan.kind = PanSpec::Kind::TwoChannel;
  } else if (kind == "3ch") {
    pan.kind = PanSpec::Kind::ThreeChannel;
  } else {
    schema_error(where + ".kind", "expected \"1ch\", \"2ch\" or \"3ch\", got \"" + kind + "\"");
  }
  pan.anchor = get_or<int>(j, "anchor", 0, where);
  pan.fraction = get_or<double>(j, "fraction", 0.5, where);
  pan.center_gain = get_or<double>(j, "center_gain", pan.center_gain, where);
  pan.pair = get_or<std::vector<int>>(j, "pair", {}, where);
  if (!(pan.fraction >= 0.0 && pan.fraction <= 1.0)) {
    schema_error(where + ".fraction", "must be in [0, 1], got " + std::to_string(pan.fraction));
  }
  if (!(pan.center_gain > 0.0 && pan.center_gain <= 1.0)) {
    schema_error(where + ".center_gain", "must be in (0, 1]");
  }
  if (!pan.pair.empty() && pan.pair.size() != 2) schema_error(where + ".pair", "must list two channels");
  return pan;
}

SignalSpec parse_signal(const json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where, "signal must be an object");
  SignalSpec s;
  s.type = get_or<std::string>(j, "type", "", where);
  s.lo_hz = get_or<double>(j, "lo_hz", 0.0, where);
  s.hi_hz = get_or<double>(j, "hi_hz", 0.0, where);
  s.freqs = get_or<std::vector<double>>(j, "freqs", {}, where);
  s.amps = get_or<std::vector<double>>(j, "amps", {}, where);
  s.f0 = get_or<double>(j, "f0", 0.0, where);
  s.f1 = get_or<double>(j, "f1", 0.0, where);
  s.rms = get_or<double>(j, "rms", 0.1, where);
  s.path = get_or<std::string>(j, "path", "", where);
  if (j.contains("burst")) {
    const json& b = j.at("burst");
    s.burst_period = get_or<double>(b, "period", 0.0, where + ".burst");
    s.burst_duty = get_or<double>(b, "duty", 1.0, where + ".burst");
    s.burst_offset = get_or<double>(b, "offset", 0.0, where + ".burst");
    if (s.burst_period < 0.0 || !(s.burst_duty > 0.0 && s.burst_duty <= 1.0)) {
      schema_error(where + ".burst", "period must be >= 0 and duty in (0, 1]");
    }
  }
  if (s.type == "noise_band" || s.type == "pink_noise") {
    if (!(s.lo_hz >= 0.0 && s.hi_hz > s.lo_hz)) schema_error(where, "needs 0 <= lo_hz < hi_hz");
  } else if (s.type == "tones") {
    if (s.freqs.empty()) schema_error(where + ".freqs", "tones need at least one frequency");
    if (!s.amps.empty() && s.amps.size() != s.freqs.size()) schema_error(where + ".amps", "length must match freqs");
  } else if (s.type == "chirp") {
    if (!(s.f0 >= 0.0 && s.f1 >= 0.0)) schema_error(where, "chirp needs f0, f1 >= 0");
  } else if (s.type == "sum") {
    if (!j.contains("parts") || !j.at("parts").is_array() || j.at("parts").empty()) {
      schema_error(where + ".parts", "sum needs a non-empty parts array");
    }
    for (std::size_t i = 0; i < j.at("parts").size(); ++i) {
      s.parts.push_back(parse_signal(j.at("parts")[i], where + ".parts[" + std::to_string(i) + "]"));
    }
  } else if (s.type == "file") {
    if (s.path.empty()) schema_error(where + ".path", "file signal needs a path");
  } else {
    schema_error(where + ".type", "unknown signal type \"" + s.type + "\"");
  }
  if (!(s.rms >= 0.0)) schema_error(where + ".rms", "must be non-negative");
  return s;
}

json signal_to_json(const SignalSpec& s) {
  json j = {{"type", s.type}, {"rms", s.rms}};
  if (s.type == "noise_band" || s.type == "pink_noise") {
    j["lo_hz"] = s.lo_hz;
    j["hi_hz"] = s.hi_hz;
  } else if (s.type == "tones") {
    j["freqs"] = s.freqs;
    if (!s.amps.empty()) j["amps"] = s.amps;
  } else if (s.type == "chirp") {
    j["f0"] = s.f0;
    j["f1"] = s.f1;
  } else if (s.type == "file") {
    j["path"] = s.path;
  } else if (s.type == "sum") {
    j["parts"] = json::array();
    for (const auto& p : s.parts) j["parts"].push_back(signal_to_json(p));
  }
  if (s.burst_period > 0.0) {
    j["burst"] = {{"period", s.burst_period}, {"duty", s.burst_duty}, {"offset", s.burst_offset}};
  }
  return j;
}

json pan_to_json(const PanSpec& p) {
  json j;
  j["kind"] = p.kind == PanSpec::Kind::OneChannel ? "1ch" : p.kind == PanSpec::Kind::TwoChannel ? "2ch" : "3ch";
  j["anchor"] = p.anchor;
  if (p.kind == PanSpec::Kind::TwoChannel) {
    j["fraction"] = p.fraction;
    if (!p.pair.empty()) j["pair"] = p.pair;
  }
  if (p.kind == PanSpec::Kind::ThreeChannel) j["center_gain"] = p.center_gain;
  return j;
}

Eigen::VectorXd white_noise(Eigen::Index length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd x(length);
  for (Eigen::Index i = 0; i < length; ++i) x[i] = dist(rng);
  return x;
}

// Shapes white noise in the frequency domain: zero outside [lo, hi], optional 1/f power.
Eigen::VectorXd shaped_noise(Eigen::Index length, int sample_rate, double lo, double hi, bool pink,
                             std::uint64_t seed) {
  const Eigen::VectorXd noise = white_noise(length, seed);
  std::vector<std::complex<double>> in(static_cast<std::size_t>(length)), spec, out;
  for (Eigen::Index i = 0; i < length; ++i) in[static_cast<std::size_t>(i)] = noise[i];
  Eigen::FFT<double> fft;
  fft.fwd(spec, in);
  for (Eigen::Index k = 0; k < length; ++k) {
    const Eigen::Index folded = std::min(k, length - k);
    const double freq = static_cast<double>(folded) * sample_rate / static_cast<double>(length);
    double gain = (freq >= lo && freq <= hi && folded > 0) ? 1.0 : 0.0;
    if (pink && gain > 0.0) gain /= std::sqrt(freq);
    spec[static_cast<std::size_t>(k)] *= gain;
  }
  fft.inv(out, spec);
  Eigen::VectorXd x(length);
  for (Eigen::Index i = 0; i < length; ++i) x[i] = out[static_cast<std::size_t>(i)].real();
  return x;
}

void apply_burst(Eigen::VectorXd& x, const SignalSpec& s, int sample_rate) {
  if (s.burst_period <= 0.0 || s.burst_duty >= 1.0) return;
  const double ramp = 0.005;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / sample_rate - s.burst_offset;
    double phase = std::fmod(t, s.burst_period);
    if (phase < 0.0) phase += s.burst_period;
    const double on = s.burst_duty * s.burst_period;
    double g = 0.0;
    if (phase < on) {
      const double edge = std::min(phase, on - phase);
      g = edge >= ramp ? 1.0 : 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp);
    }
    x[i] *= g;
  }
}

}  // namespace

Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) schema_error("root", "must be an object");
  Scenario s;
  s.base_dir = base_dir;
  s.layout_name = get_or<std::string>(j, "layout", "5.1", "root");
  s.sample_rate = get_or<int>(j, "sample_rate", 48000, "root");
  s.duration = get_or<double>(j, "duration", 10.0, "root");
  s.seed = get_or<std::uint64_t>(j, "seed", 0, "root");
  if (s.layout_name != "5.1" && s.layout_name != "7.1") schema_error("root.layout", "must be \"5.1\" or \"7.1\"");
  if (s.sample_rate <= 0) schema_error("root.sample_rate", "must be positive");
  if (!(s.duration > 0.0)) schema_error("root.duration", "must be positive");

  const ChannelLayout layout = layout_for(s.layout_name, s.layout_name == "5.1" ? 6 : 8);
  if (j.contains("sources")) {
    if (!j.at("sources").is_array()) schema_error("root.sources", "must be an array");
    for (std::size_t i = 0; i < j.at("sources").size(); ++i) {
      const json& src = j.at("sources")[i];
      const std::string where = "sources[" + std::to_string(i) + "]";
      if (!src.is_object()) schema_error(where, "must be an object");
      SourceSpec spec;
      spec.name = get_or<std::string>(src, "name", "src" + std::to_string(i), where);
      if (!src.contains("signal")) schema_error(where + ".signal", "missing");
      if (!src.contains("pan")) schema_error(where + ".pan", "missing");
      spec.signal = parse_signal(src.at("signal"), where + ".signal");
      spec.pan = parse_pan(src.at("pan"), where + ".pan");
      spec.gain_db = get_or<double>(src, "gain_db", 0.0, where);
      if (spec.pan.anchor < 0 || spec.pan.anchor >= layout.size()) {
        schema_error(where + ".pan.anchor", "must index one of the " + std::to_string(layout.size()) +
                                                " separable channels");
      }
      try {
        pan_gains(spec.pan, layout);
      } catch (const ConfigError& e) {
        schema_error(where + ".pan", e.what());
      }
      s.sources.push_back(std::move(spec));
    }
  }
  if (j.contains("common") && !j.at("common").is_null()) {
    const json& c = j.at("common");
    if (c.is_array()) schema_error("root.common", "at most one common source is supported");
    if (!c.is_object()) schema_error("root.common", "must be an object");
    CommonSpec spec;
    spec.name = get_or<std::string>(c, "name", "common", "common");
    if (!c.contains("signal")) schema_error("common.signal", "missing");
    spec.signal = parse_signal(c.at("signal"), "common.signal");
    spec.gains = get_or<std::vector<double>>(c, "gains", {}, "common");
    spec.gain_db = get_or<double>(c, "gain_db", 0.0, "common");
    if (!spec.gains.empty() && static_cast<int>(spec.gains.size()) != layout.size()) {
      schema_error("common.gains", "needs one gain per separable channel (" + std::to_string(layout.size()) + ")");
    }
    s.common.push_back(std::move(spec));
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(j, path.parent_path());
}

json scenario_to_json(const Scenario& s) {
  json j = {{"layout", s.layout_name}, {"sample_rate", s.sample_rate}, {"duration", s.duration}, {"seed", s.seed}};
  j["sources"] = json::array();
  for (const auto& src : s.sources) {
    j["sources"].push_back(
        {{"name", src.name}, {"signal", signal_to_json(src.signal)}, {"pan", pan_to_json(src.pan)}, {"gain_db", src.gain_db}});
  }
  if (!s.common.empty()) {
    const auto& c = s.common.front();
    j["common"] = {{"name", c.name}, {"signal", signal_to_json(c.signal)}, {"gain_db", c.gain_db}};
    if (!c.gains.empty()) j["common"]["gains"] = c.gains;
  }
  return j;
}

Eigen::VectorXd pan_gains(const PanSpec& pan, const ChannelLayout& layout) {
  const int n = layout.size();
  if (pan.anchor < 0 || pan.anchor >= n) throw ConfigError("pan anchor out of range");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  switch (pan.kind) {
    case PanSpec::Kind::OneChannel:
      g[pan.anchor] = 1.0;
      break;
    case PanSpec::Kind::TwoChannel: {
      int a = pan.anchor, b = layout.wrap(pan.anchor + 1);
      if (!pan.pair.empty()) {
        a = pan.pair[0];
        b = pan.pair[1];
        if (a < 0 || a >= n || b < 0 || b >= n || (layout.wrap(a + 1) != b)) {
          throw ConfigError("2ch pan requires adjacent channels (i, i+1)");
        }
      }
      const double phi = pan.fraction * std::numbers::pi / 2.0;
      g[a] = std::cos(phi);
      g[b] = std::sin(phi);
      break;
    }
    case PanSpec::Kind::ThreeChannel: {
      const double side = std::sqrt((1.0 - pan.center_gain * pan.center_gain) / 2.0);
      g[pan.anchor] = pan.center_gain;
      g[layout.wrap(pan.anchor - 1)] = side;
      g[layout.wrap(pan.anchor + 1)] = side;
      break;
    }
  }
  return g;
}

Eigen::VectorXd generate_signal(const SignalSpec& spec, int sample_rate, Eigen::Index length, std::uint64_t seed,
                                const std::filesystem::path& base_dir) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(length);
  const double fs = sample_rate;
  if (spec.type == "noise_band" || spec.type == "pink_noise") {
    x = shaped_noise(length, sample_rate, spec.lo_hz, spec.hi_hz, spec.type == "pink_noise", seed);
  } else if (spec.type == "tones") {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < spec.freqs.size(); ++k) {
      const double amp = spec.amps.empty() ? 1.0 : spec.amps[k];
      const double ph = phase(rng);
      for (Eigen::Index i = 0; i < length; ++i) {
        x[i] += amp * std::sin(2.0 * std::numbers::pi * spec.freqs[k] * static_cast<double>(i) / fs + ph);
      }
    }
  } else if (spec.type == "chirp") {
    const double total = static_cast<double>(length) / fs;
    for (Eigen::Index i = 0; i < length; ++i) {
      const double t = static_cast<double>(i) / fs;
      x[i] = std::sin(2.0 * std::numbers::pi * (spec.f0 * t + 0.5 * (spec.f1 - spec.f0) * t * t / total));
    }
  } else if (spec.type == "sum") {
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
      x += generate_signal(spec.parts[p], sample_rate, length, mix_seed(seed, p), base_dir);
    }
  } else if (spec.type == "file") {
    int rate = 0;
    std::filesystem::path path = spec.path;
    if (path.is_relative()) path = base_dir / path;
    const Eigen::VectorXd stem = read_stem_wav(path, &rate);
    if (rate != sample_rate) throw ConfigError("stem " + path.string() + " has a different sample rate");
    const Eigen::Index n = std::min(length, stem.size());
    x.head(n) = stem.head(n);
    apply_burst(x, spec, sample_rate);
    return x;
  } else {
    throw ConfigError("unknown signal type: " + spec.type);
  }
  apply_burst(x, spec, sample_rate);
  const double level = std::sqrt(x.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(length, 1)));
  if (level > 0.0) x *= spec.rms / level;
  return x;
}

RenderedScenario render_scenario(const Scenario& s) {
  RenderedScenario r;
  const int channels = s.layout_name == "5.1" ? 6 : 8;
  r.layout = layout_for(s.layout_name, channels);
  const auto length = static_cast<Eigen::Index>(std::llround(s.duration * s.sample_rate));

  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    const auto& src = s.sources[i];
    Eigen::VectorXd sig = generate_signal(src.signal, s.sample_rate, length, mix_seed(s.seed, i), s.base_dir);
    r.references.push_back(sig * std::pow(10.0, src.gain_db / 20.0));
    r.source_gains.push_back(pan_gains(src.pan, r.layout));
  }
  if (!s.common.empty()) {
    const auto& c = s.common.front();
    const Eigen::VectorXd sig = generate_signal(c.signal, s.sample_rate, length, mix_seed(s.seed, 1000), s.base_dir);
    r.common_reference = sig * std::pow(10.0, c.gain_db / 20.0);
    r.common_gains = c.gains.empty() ? Eigen::VectorXd::Ones(r.layout.size())
                                     : Eigen::Map<const Eigen::VectorXd>(c.gains.data(), r.layout.size()).eval();
  }

  auto image_of = [&](const Eigen::VectorXd& mono, const Eigen::VectorXd& gains) {
    Eigen::MatrixXd img = Eigen::MatrixXd::Zero(channels, length);
    for (int i = 0; i < r.layout.size(); ++i) {
      if (gains[i] != 0.0) img.row(r.layout.separable_indices[i]) = gains[i] * mono.transpose();
    }
    return img;
  };
  auto build = [&] {
    r.images.clear();
    r.mixture.channels = Eigen::MatrixXd::Zero(channels, length);
    for (std::size_t i = 0; i < r.references.size(); ++i) {
      r.images.push_back(image_of(r.references[i], r.source_gains[i]));
      r.mixture.channels += r.images.back();
    }
    if (r.common_reference.size() > 0) {
      r.common_image = image_of(r.common_reference, r.common_gains);
      r.mixture.channels += r.common_image;
    }
  };
  build();

  const double ceiling = std::pow(10.0, kHeadroomDb / 20.0);
  const double peak = length > 0 ? r.mixture.channels.cwiseAbs().maxCoeff() : 0.0;
  if (peak > ceiling) {
    r.normalization_gain = ceiling / peak;
    for (auto& ref : r.references) ref *= r.normalization_gain;
    r.common_reference *= r.normalization_gain;
    build();
  }
  r.mixture.sample_rate = s.sample_rate;
  r.mixture.layout_name = s.layout_name;

  json m;
  m["scenario"] = scenario_to_json(s);
  m["layout"] = s.layout_name;
  m["sample_rate"] = s.sample_rate;
  m["num_samples"] = length;
  m["normalization_gain"] = r.normalization_gain;
  m["mixture"] = "mixture.wav";
  m["sources"] = json::array();
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    m["sources"].push_back({{"name", s.sources[i].name},
                            {"file", "ref_" + std::to_string(i) + ".wav"},
                            {"pan", pan_to_json(s.sources[i].pan)},
                            {"gain_db", s.sources[i].gain_db},
                            {"channel_gains", std::vector<double>(r.source_gains[i].data(),
                                                                  r.source_gains[i].data() + r.source_gains[i].size())}});
  }
  if (!s.common.empty()) {
    m["common"] = {{"name", s.common.front().name},
                   {"file", "ref_common.wav"},
                   {"gain_db", s.common.front().gain_db},
                   {"channel_gains",
                    std::vector<double>(r.common_gains.data(), r.common_gains.data() + r.common_gains.size())}};
  }
  r.manifest = std::move(m);
  return r;
}

void write_rendered(const RenderedScenario& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_wav(out_dir / "mixture.wav", r.mixture, BitDepth::Float32);
  for (std::size_t i = 0; i < r.references.size(); ++i) {
    write_stem_wav(out_dir / ("ref_" + std::to_string(i) + ".wav"), r.references[i], r.mixture.sample_rate);
  }
  if (r.common_reference.size() > 0) {
    write_stem_wav(out_dir / "ref_common.wav", r.common_reference, r.mixture.sample_rate);
  }
  std::ofstream f(out_dir / "manifest.json");
  if (!f) throw Error("cannot write manifest in " + out_dir.string());
  f << r.manifest.dump(2) << "\n";
}

}  // namespace ilvsep
