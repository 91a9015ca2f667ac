#include "ilvsep/bsseval.hpp"
#include "ilvsep/error.hpp"
#include "ilvsep/pipeline.hpp"
#include "scenarios.hpp"

#include <doctest.h>
#include <json.hpp>

using namespace ilvsep;
using nlohmann::json;

TEST_CASE("config parsing and validation") {
  const PipelineConfig defaults;
  CHECK(config_to_json(config_from_json(config_to_json(defaults))) == config_to_json(defaults));

  const auto c = config_from_json(json::parse(R"({"frame_len": 512, "gmm": {"k": 3}, "vmm": {"components": 4, "seed": 9}})"));
  CHECK(c.frame_len == 512);
  CHECK(c.gmm.k == 3);
  CHECK(c.vmm.components == 4);
  CHECK(c.vmm.seed == 9);
  CHECK(config_from_json(json::parse(R"({"vmm": {"components": "auto"}})")).vmm.components == 0);

  CHECK_THROWS_AS(config_from_json(json::parse(R"({"frame_len": 100.5})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"frame_len": 63})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"gmm": {"d_sigma": 0}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"vmm": {"components": "many"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"layout": "quad"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse("[1, 2]")), ConfigError);
}

TEST_CASE("GMM initialisation follows the ideal R values") {
  const auto l = layout_for("7.1", 8);
  const auto init = default_gmm_init(l, 4);
  REQUIRE(init.size() == 4);
  CHECK(init[0] == 0.0);
  CHECK(init[1] == doctest::Approx(0.5));
  CHECK(init[2] == doctest::Approx(std::sqrt(3.0) / 2));
  CHECK(init[3] == 1.0);
  CHECK(default_gmm_init(l, 3).size() == 3);
}

TEST_CASE("common-only mixture") {
  const auto rendered = render_scenario(scenarios::pure_common_51(4.0));
  const auto r = separate(rendered.mixture, PipelineConfig{});
  REQUIRE(r.band.present);
  REQUIRE(r.common_stem.size() == rendered.common_reference.size());
  const auto m = sdr_sir_sar(decompose(r.common_stem, {rendered.common_reference}, 0));
  CHECK(m.sdr >= 30.0);
  const double common_energy = r.common_stem.squaredNorm();
  for (const auto& s : r.object_stems) CHECK(10 * std::log10(s.squaredNorm() / common_energy + 1e-30) <= -40.0);
}

TEST_CASE("mixture without a common signal") {
  Scenario s;
  s.duration = 3.0;
  s.seed = 2;
  s.sources = {scenarios::source("a", scenarios::band_burst(1000, 2000, 0, 0), scenarios::Kind::TwoChannel, 0),
               scenarios::source("b", scenarios::band_burst(4000, 6000, 0, 0), scenarios::Kind::OneChannel, 2)};
  const auto rendered = render_scenario(s);
  PipelineConfig cfg;
  cfg.vmm.components = 2;
  const auto r = separate(rendered.mixture, cfg);
  CHECK_FALSE(r.band.present);
  CHECK(r.common_stem.size() == 0);
  CHECK(r.noncommon.channels == rendered.mixture.channels);
  REQUIRE(r.object_stems.size() == 2);
  const auto meta = separation_metadata(r, cfg);
  CHECK(meta.at("common_band").at("present") == false);
  CHECK(meta.at("common_stem").is_null());
  CHECK(meta.at("vmm").contains("means_rad"));
  CHECK(meta.at("assignment").size() == 2);

  SUBCASE("identical runs are identical") {
    const auto again = separate(rendered.mixture, cfg);
    for (std::size_t k = 0; k < r.object_stems.size(); ++k) CHECK(again.object_stems[k] == r.object_stems[k]);
    CHECK(separation_metadata(again, cfg).dump() == meta.dump());
  }
}

TEST_CASE("pipeline rejects unusable input") {
  MultichannelAudio a;
  a.channels = Eigen::MatrixXd::Zero(6, 4096);
  CHECK_THROWS_AS(separate(a, PipelineConfig{}), Error);
  a.channels = Eigen::MatrixXd::Random(5, 4096);
  CHECK_THROWS_AS(separate(a, PipelineConfig{}), ConfigError);
}

TEST_CASE("report CSV") {
  EvalReport rep;
  StemScore row;
  row.stem = "object_0.wav";
  row.reference = "a";
  row.metrics = {10.0, 20.0, 30.0};
  rep.rows.push_back(row);
  rep.noncommon_mean = row.metrics;
  rep.noncommon_count = 1;
  const std::string csv = eval_report_csv(rep);
  CHECK(csv.rfind("stem,ref,SDR,SIR,SAR\n", 0) == 0);
  CHECK(csv.find("object_0.wav,a,") != std::string::npos);
  CHECK(csv.find("noncommon_average,,") != std::string::npos);
}
