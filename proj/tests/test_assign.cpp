#include "ilvsep/assign.hpp"
#include "ilvsep/bsseval.hpp"
#include "ilvsep/mixgen.hpp"
#include "ilvsep/transform.hpp"
#include "scenarios.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace ilvsep;

namespace {

constexpr double kPi = std::numbers::pi;

VonMisesMixture mixture_at(std::vector<double> means, double m = 20.0) {
  VonMisesMixture v;
  const auto k = static_cast<Eigen::Index>(means.size());
  v.means = Eigen::Map<Eigen::VectorXd>(means.data(), k);
  v.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  v.concentrations = Eigen::VectorXd::Constant(k, m);
  return v;
}

std::vector<Eigen::MatrixXd> separable_grids(const TfTensor& tf, const ChannelLayout& layout) {
  std::vector<Eigen::MatrixXd> g;
  for (int idx : layout.separable_indices) g.push_back(tf.coeffs[static_cast<std::size_t>(idx)]);
  return g;
}

BoolGrid all_bins(const IlvsField& f) { return BoolGrid::Constant(f.num_bins(), f.num_frames(), true); }

}  // namespace

TEST_CASE("channel summation rules") {
  const auto l = layout_for("7.1", 8);
  const double tv = l.theta_v;
  const auto opt = resolve({}, l);
  CHECK(opt.axis_tol == doctest::Approx(tv / 8));
  CHECK(opt.merge_tol == doctest::Approx(tv / 4));

  CHECK(rule_for_component(2 * tv, 0.99, l, opt.axis_tol, opt.r_single_tol) == single_rule(2, l));
  CHECK(rule_for_component(2 * tv, 0.52, l, opt.axis_tol, opt.r_single_tol) == triple_rule(2, l));
  CHECK(triple_rule(2, l).channels == std::vector<int>{1, 2, 3});
  CHECK(rule_for_component(2 * tv + tv / 2, 0.87, l, opt.axis_tol, opt.r_single_tol) == pair_rule(2, l));
  CHECK(pair_rule(2, l).channels == std::vector<int>{2, 3});
  const auto wrapped = rule_for_component(-tv / 2, 0.87, l, opt.axis_tol, opt.r_single_tol);
  CHECK(wrapped.kind == ChannelSumRule::Kind::Pair);
  CHECK(wrapped.channels == std::vector<int>{5, 0});
  CHECK(triple_rule(0, l).channels == std::vector<int>{5, 0, 1});
  CHECK(rule_for_component(0.3 * tv, 1.0, l, opt.axis_tol, opt.r_single_tol) == pair_rule(0, l));
  CHECK(single_rule(3, l).to_string() == "single(3)");
  CHECK(triple_rule(0, l).to_string() == "triple(5,0,1)");

  // the single/triple boundary sits between the two ideal values
  const auto l51 = layout_for("5.1", 6);
  const auto o51 = resolve({}, l51);
  const double mid = (1.0 + ideal_r(3, l51.theta_v)) / 2;
  CHECK(rule_for_component(kPi, mid + 0.01, l51, o51.axis_tol, o51.r_single_tol) == single_rule(2, l51));
  CHECK(rule_for_component(kPi, mid - 0.01, l51, o51.axis_tol, o51.r_single_tol) == triple_rule(2, l51));
}

TEST_CASE("two point sources are partitioned exactly") {
  const auto l = layout_for("5.1", 6);
  const int m = 128;
  TfTensor tf;
  tf.frame_len = m;
  tf.coeffs.assign(6, Eigen::MatrixXd::Zero(m, 30));
  Eigen::MatrixXi label(m, 30);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index t = 0; t < 30; ++t) {
    for (Eigen::Index f = 0; f < m; ++f) {
      const double v = g(rng);
      if ((f + t) % 2 == 0) {
        tf.coeffs[0](f, t) = 0.8 * v;  // between L and R, nearer L
        tf.coeffs[1](f, t) = 0.6 * v;
        label(f, t) = 0;
      } else {
        tf.coeffs[5](f, t) = v;  // on Rs
        label(f, t) = 1;
      }
    }
  }
  const auto field = compute_ilvs(tf, l);
  std::vector<double> angles;
  for (Eigen::Index t = 0; t < 30; ++t) {
    for (Eigen::Index f = 0; f < m; ++f) angles.push_back(field.angle(f, t));
  }
  const auto fit = fit_vm_mixture(angles, 2, 1);
  auto map = assign_bins(field, fit, all_bins(field));
  const int a = map.component(0, 0);
  const int b = 1 - a;
  for (Eigen::Index t = 0; t < 30; ++t) {
    for (Eigen::Index f = 0; f < m; ++f) CHECK(map.component(f, t) == (label(f, t) == 0 ? a : b));
  }
  attach_rules(map, l, {});
  REQUIRE(map.components.size() == 2);
  CHECK(map.components[static_cast<std::size_t>(a)].rule == pair_rule(0, l));
  CHECK(map.components[static_cast<std::size_t>(b)].rule == single_rule(2, l));
  CHECK(map.components[static_cast<std::size_t>(b)].mean_r == doctest::Approx(1.0));
}

TEST_CASE("silent and ineligible bins are not assigned") {
  const auto l = layout_for("5.1", 6);
  TfTensor tf;
  tf.frame_len = 64;
  tf.coeffs.assign(6, Eigen::MatrixXd::Zero(64, 2));
  tf.coeffs[0].col(0).setOnes();
  const auto field = compute_ilvs(tf, l);
  BoolGrid eligible = all_bins(field);
  eligible(5, 0) = false;
  const auto map = assign_bins(field, mixture_at({0.0, kPi}), eligible);
  CHECK(map.component(0, 0) == 0);
  CHECK(map.component(5, 0) == -1);
  CHECK((map.component.col(1).array() == -1).all());
  CHECK(map.components[1].bin_count == 0);
}

TEST_CASE("a source on one channel is rebuilt from that channel") {
  const auto l = layout_for("7.1", 8);
  MultichannelAudio a;
  a.channels = Eigen::MatrixXd::Zero(8, 24000);
  const Eigen::VectorXd s = oracle::white(24000, 9, 0.1);
  a.channels.row(l.separable_indices[2]) = s.transpose();
  const auto tf = mdct_forward(a, 512);
  const auto field = compute_ilvs(tf, l);
  auto map = assign_bins(field, mixture_at({2 * l.theta_v}), all_bins(field));
  attach_rules(map, l, {});
  REQUIRE(map.components.size() == 1);
  CHECK(map.components[0].rule == single_rule(2, l));
  const auto stems = reconstruct_sources(separable_grids(tf, l), map, 512, s.size());
  CHECK(oracle::snr_db(s, stems[0]) >= 60.0);
}

TEST_CASE("disjoint-band sources separate cleanly") {
  Scenario sc;
  sc.layout_name = "5.1";
  sc.duration = 3.0;
  sc.seed = 3;
  sc.sources = {scenarios::source("low", scenarios::band_burst(1000, 2000, 0, 0), scenarios::Kind::TwoChannel, 0),
                scenarios::source("high", scenarios::band_burst(5000, 7000, 0, 0), scenarios::Kind::OneChannel, 2)};
  const auto r = render_scenario(sc);
  const auto tf = mdct_forward(r.mixture, 1024);
  const auto field = compute_ilvs(tf, r.layout);
  std::vector<double> angles;
  for (Eigen::Index t = 0; t < field.num_frames(); ++t) {
    for (Eigen::Index f = 0; f < field.num_bins(); ++f) {
      if (!field.silent(f, t) && !field.directionless(f, t)) angles.push_back(field.angle(f, t));
    }
  }
  const auto fit = fit_vm_mixture(angles, 2, 1);
  auto map = assign_bins(field, fit, all_bins(field));
  attach_rules(map, r.layout, {});
  const auto stems = reconstruct_sources(separable_grids(tf, r.layout), map, 1024, r.mixture.num_samples());
  REQUIRE(stems.size() == 2);
  const auto match = match_stems(stems, r.references);
  CHECK(match.spurious.empty());
  for (std::size_t i = 0; i < stems.size(); ++i) {
    const auto m = sdr_sir_sar(decompose(stems[i], r.references, match.reference_of[i]));
    CHECK(m.sir >= 30.0);
  }

  SUBCASE("stem coefficients never exceed the channel loudness sum") {
    const auto grids = separable_grids(tf, r.layout);
    for (int k = 0; k < 2; ++k) {
      const auto s = source_grid(grids, map, k);
      CHECK(((s.array().abs() - field.loudness_sum.array()) <= 1e-12).all());
    }
  }
}

TEST_CASE("a component without bins yields a silent stem") {
  const auto l = layout_for("5.1", 6);
  AssignmentMap map;
  map.component = Eigen::MatrixXi::Zero(64, mdct_num_frames(2000, 64));
  map.components.resize(2);
  map.components[0].rule = single_rule(0, l);
  map.components[1].rule = single_rule(1, l);
  std::vector<Eigen::MatrixXd> grids(4, Eigen::MatrixXd::Ones(64, map.component.cols()));
  const auto stems = reconstruct_sources(grids, map, 64, 2000);
  CHECK(stems[0].squaredNorm() > 0.0);
  CHECK(stems[1].squaredNorm() == 0.0);
}

TEST_CASE("duplicate components merge and empty ones drop") {
  const auto l = layout_for("5.1", 6);
  AssignmentMap map;
  map.component = Eigen::MatrixXi(1, 4);
  map.component << 0, 1, 0, 2;
  map.components.resize(4);
  const double angles[] = {0.05, 6.25, kPi, kPi / 4};
  for (int k = 0; k < 4; ++k) {
    map.components[static_cast<std::size_t>(k)].mean_angle = angles[k];
    map.components[static_cast<std::size_t>(k)].mean_r = 0.95;
    map.components[static_cast<std::size_t>(k)].responsibility_mass = 1.0;
    map.components[static_cast<std::size_t>(k)].weight = 0.25;
  }
  map.components[0].bin_count = 2;
  map.components[1].bin_count = 1;
  map.components[2].bin_count = 1;
  attach_rules(map, l, {});
  REQUIRE(map.components.size() == 2);
  CHECK(map.components[0].rule == single_rule(0, l));
  CHECK(map.components[0].bin_count == 3);
  CHECK(map.components[0].weight == doctest::Approx(0.5));
  CHECK(map.components[1].rule == single_rule(2, l));
  CHECK(map.component(0, 1) == 0);
  CHECK(map.component(0, 2) == 0);
  CHECK(map.component(0, 3) == 1);
}
