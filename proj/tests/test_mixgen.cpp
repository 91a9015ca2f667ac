#include "ilvsep/error.hpp"
#include "ilvsep/mixgen.hpp"
#include "ilvsep/transform.hpp"
#include "scenarios.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>

using namespace ilvsep;
using nlohmann::json;

namespace {

PanSpec pan(PanSpec::Kind kind, int anchor, double fraction = 0.5) {
  PanSpec p;
  p.kind = kind;
  p.anchor = anchor;
  p.fraction = fraction;
  return p;
}

json minimal_scenario() {
  return json::parse(R"({
    "layout": "5.1", "sample_rate": 8000, "duration": 0.5, "seed": 4,
    "sources": [
      {"name": "a", "signal": {"type": "noise_band", "lo_hz": 300, "hi_hz": 900}, "pan": {"kind": "1ch", "anchor": 1}},
      {"name": "b", "signal": {"type": "tones", "freqs": [440, 660]}, "pan": {"kind": "2ch", "anchor": 2, "fraction": 0.3}}
    ],
    "common": {"signal": {"type": "pink_noise", "lo_hz": 50, "hi_hz": 3000}}
  })");
}

}  // namespace

TEST_CASE("pan gains") {
  const auto l = layout_for("7.1", 8);
  const Eigen::VectorXd g1 = pan_gains(pan(PanSpec::Kind::OneChannel, 3), l);
  CHECK(g1 == (Eigen::VectorXd(6) << 0, 0, 0, 1, 0, 0).finished());

  const Eigen::VectorXd g2 = pan_gains(pan(PanSpec::Kind::TwoChannel, 1, 0.5), l);
  CHECK(g2[1] == doctest::Approx(std::sqrt(0.5)));
  CHECK(g2[2] == doctest::Approx(std::sqrt(0.5)));

  const Eigen::VectorXd g3 = pan_gains(pan(PanSpec::Kind::ThreeChannel, 0), l);
  CHECK(g3[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(g3[1] == doctest::Approx(0.5));
  CHECK(g3[5] == doctest::Approx(0.5));

  PanSpec wrap = pan(PanSpec::Kind::TwoChannel, 5, 0.25);
  const Eigen::VectorXd gw = pan_gains(wrap, l);
  CHECK(gw[5] == doctest::Approx(std::cos(0.25 * M_PI / 2)));
  CHECK(gw[0] == doctest::Approx(std::sin(0.25 * M_PI / 2)));

  for (int a = 0; a < 6; ++a) {
    for (double p : {0.0, 0.1, 0.5, 0.77, 1.0}) {
      for (auto kind : {PanSpec::Kind::OneChannel, PanSpec::Kind::TwoChannel, PanSpec::Kind::ThreeChannel}) {
        CHECK(std::abs(pan_gains(pan(kind, a, p), l).squaredNorm() - 1.0) <= 1e-12);
      }
    }
  }

  PanSpec bad = pan(PanSpec::Kind::TwoChannel, 0);
  bad.pair = {0, 2};
  CHECK_THROWS_AS(pan_gains(bad, l), ConfigError);
  bad.pair = {5, 0};
  CHECK_NOTHROW(pan_gains(bad, l));
}

TEST_CASE("generated signals") {
  SignalSpec s = scenarios::band_burst(1000, 2000, 0.0, 0.0, 0.2);
  const Eigen::VectorXd x = generate_signal(s, 48000, 48000, 1);
  CHECK(std::sqrt(x.squaredNorm() / x.size()) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(generate_signal(s, 48000, 48000, 1) == x);
  CHECK(generate_signal(s, 48000, 48000, 2) != x);

  // energy stays inside the band
  const Eigen::MatrixXd grid = mdct_analyze(x, 1024);
  const double bin_hz = 48000.0 / 2 / 1024;
  double inside = 0.0;
  for (Eigen::Index f = 0; f < grid.rows(); ++f) {
    const double hz = (f + 0.5) * bin_hz;
    if (hz > 950 && hz < 2050) inside += grid.row(f).squaredNorm();
  }
  CHECK(inside / grid.squaredNorm() > 0.99);

  SignalSpec gated = scenarios::band_burst(1000, 2000, 1.0, 0.0);
  const Eigen::VectorXd y = generate_signal(gated, 48000, 96000, 1);
  CHECK(y.segment(30000, 10000).cwiseAbs().maxCoeff() == 0.0);  // 0.625 s - 0.833 s is in the gap
  CHECK(y.segment(5000, 10000).squaredNorm() > 0.0);

  SignalSpec bad;
  bad.type = "whistle";
  CHECK_THROWS_AS(generate_signal(bad, 48000, 100, 1), ConfigError);
}

TEST_CASE("rendering") {
  const Scenario s = parse_scenario(minimal_scenario());
  const auto r = render_scenario(s);
  CHECK(r.mixture.num_channels() == 6);
  CHECK(r.mixture.num_samples() == 4000);
  CHECK(r.references.size() == 2);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(6, 4000);
  for (const auto& img : r.images) sum += img;
  sum += r.common_image;
  CHECK((sum - r.mixture.channels).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(r.mixture.channels.cwiseAbs().maxCoeff() <= std::pow(10.0, -0.1 / 20) + 1e-12);
  // center and LFE stay silent
  CHECK(r.mixture.channels.row(2).squaredNorm() == 0.0);
  CHECK(r.mixture.channels.row(3).squaredNorm() == 0.0);

  SUBCASE("re-render from the manifest is bit-exact") {
    const auto again = render_scenario(parse_scenario(r.manifest.at("scenario")));
    CHECK(again.mixture.channels == r.mixture.channels);
    CHECK(again.manifest.dump() == r.manifest.dump());
  }
}

TEST_CASE("a one-channel source drives one channel") {
  Scenario s;
  s.duration = 0.5;
  s.sources = {scenarios::source("x", scenarios::band_burst(500, 900, 0, 0), scenarios::Kind::OneChannel, 3)};
  const auto r = render_scenario(s);
  int nonzero = 0;
  for (Eigen::Index c = 0; c < 6; ++c) nonzero += r.mixture.channels.row(c).squaredNorm() > 0.0;
  CHECK(nonzero == 1);
  CHECK(r.mixture.channels.row(r.layout.separable_indices[3]).squaredNorm() > 0.0);
}

TEST_CASE("loud scenarios are normalized as a whole") {
  json j = minimal_scenario();
  j["sources"][0]["signal"]["rms"] = 2.0;
  const auto r = render_scenario(parse_scenario(j));
  CHECK(r.normalization_gain < 1.0);
  CHECK(r.mixture.channels.cwiseAbs().maxCoeff() == doctest::Approx(std::pow(10.0, -0.1 / 20)));
  Eigen::MatrixXd sum = r.images[0] + r.images[1] + r.common_image;
  CHECK((sum - r.mixture.channels).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("schema errors name the offending field") {
  json j = minimal_scenario();
  j["sources"][1]["pan"]["fraction"] = 1.5;
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("sources[1].pan.fraction"), ConfigError);

  j = minimal_scenario();
  j["sources"][0]["pan"]["anchor"] = 4;
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("sources[0].pan.anchor"), ConfigError);

  j = minimal_scenario();
  j["sources"][0]["pan"]["kind"] = "4ch";
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("sources[0].pan.kind"), ConfigError);

  j = minimal_scenario();
  j["common"] = json::array({j["common"], j["common"]});
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  j = minimal_scenario();
  j["layout"] = "quad";
  CHECK_THROWS_AS(parse_scenario(j), ConfigError);

  j = minimal_scenario();
  j["sources"][1]["pan"]["pair"] = {2, 0};
  CHECK_THROWS_WITH_AS(parse_scenario(j), doctest::Contains("sources[1].pan"), ConfigError);

  j = minimal_scenario();
  j["sources"][0]["signal"] = {{"type", "file"}, {"path", "missing.wav"}};
  CHECK_THROWS_AS(render_scenario(parse_scenario(j)), Error);
}
