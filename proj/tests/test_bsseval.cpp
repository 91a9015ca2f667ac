#include "ilvsep/bsseval.hpp"
#include "ilvsep/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace ilvsep;

namespace {

// Component of b orthogonal to a.
Eigen::VectorXd orthogonalize(const Eigen::VectorXd& b, const Eigen::VectorXd& a) {
  return b - (a.dot(b) / a.squaredNorm()) * a;
}

}  // namespace

TEST_CASE("identity estimate") {
  const std::vector<Eigen::VectorXd> refs{oracle::white(4000, 1), oracle::white(4000, 2)};
  const auto d = decompose(refs[0], refs, 0);
  CHECK(d.interference.squaredNorm() / refs[0].squaredNorm() <= 1e-10);
  CHECK(d.artifacts.squaredNorm() / refs[0].squaredNorm() <= 1e-10);
  const auto m = sdr_sir_sar(decompose(refs[0], {refs[0]}, 0));
  CHECK(m.sdr >= 150.0);
  CHECK(m.sir == kMetricCapDb);
}

TEST_CASE("known interference and noise levels") {
  const Eigen::VectorXd s = oracle::white(20000, 3);
  const Eigen::VectorXd raw = orthogonalize(oracle::white(20000, 4), s);
  const Eigen::VectorXd interferer = raw * std::sqrt(0.1 * s.squaredNorm() / raw.squaredNorm());
  const auto m = sdr_sir_sar(decompose(s + interferer, {s, interferer}, 0));
  CHECK(m.sir == doctest::Approx(10.0).epsilon(0.01));
  CHECK(std::abs(m.sir - 10.0) <= 0.1);

  const Eigen::VectorXd n0 = oracle::white(20000, 5);
  const Eigen::VectorXd noise = n0 * std::sqrt(0.01 * s.squaredNorm() / n0.squaredNorm());
  const auto mn = sdr_sir_sar(decompose(s + noise, {s}, 0));
  CHECK(std::abs(mn.sdr - 20.0) <= 0.2);

  const auto scaled = sdr_sir_sar(decompose(2.0 * (s + noise), {s}, 0));
  CHECK(std::abs(scaled.sdr - mn.sdr) <= 1e-9);
  CHECK(std::abs(scaled.sir - mn.sir) <= 1e-9);
  CHECK(std::abs(scaled.sar - mn.sar) <= 1e-9);
}

TEST_CASE("estimate orthogonal to every reference") {
  const Eigen::VectorXd s = oracle::white(3000, 6);
  const Eigen::VectorXd e = orthogonalize(oracle::white(3000, 7), s);
  CHECK(sdr_sir_sar(decompose(e, {s}, 0)).sdr == -kMetricCapDb);
}

TEST_CASE("additivity and orthogonality on random cases") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 500 + static_cast<int>(rng() % 1500);
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<Eigen::VectorXd> refs;
    for (int j = 0; j < k; ++j) refs.push_back(oracle::white(n, rng()));
    const Eigen::VectorXd e = oracle::white(n, rng());
    const auto d = decompose(e, refs, static_cast<int>(rng() % k));
    const Eigen::VectorXd sum = d.target + d.interference + d.artifacts;
    CHECK((sum - e).squaredNorm() <= 1e-12 * e.squaredNorm());
    const Eigen::VectorXd proj = d.target + d.interference;
    CHECK(std::abs(d.target.dot(d.interference)) <= 1e-9 * d.target.norm() * d.interference.norm() + 1e-300);
    CHECK(std::abs(proj.dot(d.artifacts)) <= 1e-9 * proj.norm() * d.artifacts.norm());
  }
}

TEST_CASE("length trimming and degenerate input") {
  const Eigen::VectorXd s = oracle::white(1000, 8);
  const auto d = decompose(oracle::white(1200, 8), {s}, 0);
  CHECK(d.target.size() == 1000);
  CHECK_THROWS_AS(decompose(Eigen::VectorXd::Zero(1000), {s}, 0), Error);
  CHECK_THROWS_AS(decompose(s, {Eigen::VectorXd::Zero(1000)}, 0), Error);
}

TEST_CASE("stem matching") {
  const std::vector<Eigen::VectorXd> refs{oracle::white(3000, 11), oracle::white(3000, 12), oracle::white(3000, 13)};
  const auto m = match_stems({refs[2], refs[0], refs[1]}, refs);
  CHECK(m.reference_of == std::vector<int>{2, 0, 1});
  CHECK(m.spurious.empty());
  CHECK(m.missed.empty());

  const auto extra = match_stems({refs[1], Eigen::VectorXd::Zero(3000), refs[0]}, refs);
  CHECK(extra.reference_of == std::vector<int>{1, -1, 0});
  CHECK(extra.spurious == std::vector<int>{1});
  CHECK(extra.missed == std::vector<int>{2});

  // noisy mixtures still pair with their dominant source
  const auto noisy = match_stems({refs[1] + 0.3 * refs[0], refs[2] + 0.2 * refs[1], refs[0] + 0.3 * refs[2]}, refs);
  CHECK(noisy.reference_of == std::vector<int>{1, 2, 0});

  // one claimable reference: residue of an interferer must not win the tie
  const Eigen::VectorXd residue = 0.1 * refs[1] + 0.05 * oracle::white(3000, 14);
  const Eigen::VectorXd good = refs[0] + 0.1 * refs[1];
  const auto single = match_stems({residue, good}, refs, 1);
  CHECK(single.reference_of == std::vector<int>{-1, 0});
  const auto alone = match_stems({0.01 * oracle::white(3000, 15) + 0.001 * refs[0], refs[0]}, {refs[0]});
  CHECK(alone.reference_of == std::vector<int>{-1, 0});
}

TEST_CASE("report over objects and common") {
  const std::vector<NamedSignal> refs{{"a", oracle::white(3000, 21)}, {"b", oracle::white(3000, 22)}};
  const NamedSignal common{"bg", oracle::white(3000, 23)};
  const std::vector<NamedSignal> est{{"object_0.wav", refs[1].signal}, {"object_1.wav", refs[0].signal + 0.1 * common.signal}};
  const NamedSignal common_est{"common.wav", common.signal};
  const auto report = evaluate(est, &common_est, refs, &common);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].reference == "a");
  CHECK(report.rows[0].stem == "object_1.wav");
  CHECK(std::abs(report.rows[0].metrics.sir - 20.0) <= 0.5);
  CHECK(report.rows[1].reference == "b");
  CHECK(report.rows[2].common);
  CHECK(report.noncommon_count == 2);
  CHECK(report.spurious.empty());
  CHECK(report.missed.empty());
}
