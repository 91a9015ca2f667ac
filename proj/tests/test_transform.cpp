#include "ilvsep/error.hpp"
#include "ilvsep/transform.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <numbers>

using namespace ilvsep;

TEST_CASE("fast MDCT matches the direct sum") {
  for (int m : {64, 256, 1024}) {
    const Eigen::VectorXd block = oracle::white(2 * m, 7 + m);
    const MdctPlan<double> plan(m);
    Eigen::VectorXd fast(m);
    plan.forward(block.data(), fast.data());
    const Eigen::VectorXd direct = oracle::mdct_direct(block);
    CHECK((fast - direct).cwiseAbs().maxCoeff() <= 1e-11 * direct.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("Princen-Bradley window condition") {
  for (int m : {64, 1024}) {
    const auto w = sine_window<double>(m);
    for (int n = 0; n < m; ++n) CHECK(std::abs(w[n] * w[n] + w[n + m] * w[n + m] - 1.0) <= 1e-12);
  }
}

TEST_CASE("white-noise round trip") {
  const Eigen::VectorXd x = oracle::white(48000, 3);
  const Eigen::MatrixXd grid = mdct_analyze(x, 1024);
  CHECK(grid.rows() == 1024);
  CHECK(grid.cols() == mdct_num_frames(48000, 1024));
  const Eigen::VectorXd y = mdct_synthesize(grid, 1024, x.size());
  CHECK(oracle::snr_db(x, y) >= 100.0);
  CHECK((x - y).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("impulse round trip") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3000);
  x[1234] = 1.0;
  const Eigen::VectorXd y = mdct_synthesize(mdct_analyze(x, 256), 256, x.size());
  CHECK((x - y).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("linearity and zero input") {
  const Eigen::VectorXd a = oracle::white(5000, 1), b = oracle::white(5000, 2);
  const Eigen::MatrixXd lhs = mdct_analyze(0.3 * a - 2.0 * b, 512);
  const Eigen::MatrixXd rhs = 0.3 * mdct_analyze(a, 512) - 2.0 * mdct_analyze(b, 512);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(mdct_analyze(Eigen::VectorXd::Zero(5000), 512).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(512, mdct_num_frames(5000, 512));
  CHECK(mdct_synthesize(zeros, 512, 5000).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a cosine at a bin centre concentrates in that bin") {
  const int m = 1024, f0 = 100;
  Eigen::VectorXd x(20 * m);
  for (Eigen::Index n = 0; n < x.size(); ++n) x[n] = std::cos(std::numbers::pi / m * (f0 + 0.5) * n);
  const Eigen::MatrixXd grid = mdct_analyze(x, m);
  // interior frames only; the edge frames see the zero padding
  for (Eigen::Index t = 2; t < grid.cols() - 2; ++t) {
    const double total = grid.col(t).squaredNorm();
    const double near = grid.col(t).segment(f0 - 1, 3).squaredNorm();
    CHECK(near / total > 0.9);
  }
}

TEST_CASE("multichannel forward and inverse") {
  MultichannelAudio a;
  a.channels.resize(3, 7001);
  for (int c = 0; c < 3; ++c) a.channels.row(c) = oracle::white(7001, 40 + c).transpose();
  const TfTensor tf = mdct_forward(a, 256);
  CHECK(tf.num_channels() == 3);
  CHECK(tf.num_bins() == 256);
  const MultichannelAudio b = mdct_inverse(tf);
  CHECK((a.channels - b.channels).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("invalid frame lengths and grids") {
  const Eigen::VectorXd x = oracle::white(1000, 1);
  CHECK_THROWS_AS(mdct_analyze(x, 63), ConfigError);
  CHECK_THROWS_AS(mdct_analyze(x, 32), ConfigError);
  CHECK_THROWS_AS(mdct_analyze(x, 101), ConfigError);
  CHECK_THROWS_AS(mdct_synthesize(Eigen::MatrixXd::Zero(128, 3), 128, 1000), Error);
  TfTensor tf;
  tf.frame_len = 64;
  tf.signal_length = 100;
  tf.coeffs = {Eigen::MatrixXd::Zero(64, 3), Eigen::MatrixXd::Zero(64, 4)};
  CHECK_THROWS_AS(mdct_inverse(tf), Error);
}
