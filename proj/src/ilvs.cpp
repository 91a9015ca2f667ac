#include "ilvsep/ilvs.hpp"

#include "ilvsep/error.hpp"

#include <cmath>
#include <numbers>

namespace ilvsep {

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w -= two_pi;
  return w;
}

double wrap_difference(double delta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(delta, two_pi);
  if (w > std::numbers::pi) w -= two_pi;
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

double ideal_r(int multiplicity, double theta_v) {
  switch (multiplicity) {
    case 1: return 1.0;
    case 2: return std::cos(theta_v / 2.0);
    case 3: return (1.0 + std::cos(theta_v)) / 3.0;
    default: throw ConfigError("ideal_r multiplicity must be 1, 2 or 3");
  }
}

IlvsField compute_ilvs(const TfTensor& tf, const ChannelLayout& layout) {
  for (int idx : layout.separable_indices) {
    if (idx < 0 || idx >= tf.num_channels()) {
      throw Error("layout references channel " + std::to_string(idx) + " but tensor has " +
                  std::to_string(tf.num_channels()));
    }
  }
  const Eigen::Index bins = tf.num_bins();
  const Eigen::Index frames = tf.num_frames();

  Eigen::MatrixXd vx = Eigen::MatrixXd::Zero(bins, frames);
  Eigen::MatrixXd vy = Eigen::MatrixXd::Zero(bins, frames);
  IlvsField field;
  field.loudness_sum = Eigen::MatrixXd::Zero(bins, frames);
  for (int i = 0; i < layout.size(); ++i) {
    const Eigen::ArrayXXd mag = tf.coeffs[layout.separable_indices[i]].array().abs();
    vx.array() += std::cos(layout.axis_angle_rad[i]) * mag;
    vy.array() += std::sin(layout.axis_angle_rad[i]) * mag;
    field.loudness_sum.array() += mag;
  }

  field.magnitude = vx.array().binaryExpr(vy.array(), [](double x, double y) { return std::hypot(x, y); });
  const double floor = kSilentFloor * field.loudness_sum.maxCoeff();
  field.silent = field.loudness_sum.array() <= floor;
  field.r_value = Eigen::MatrixXd::Zero(bins, frames);
  field.angle = Eigen::MatrixXd::Zero(bins, frames);
  field.directionless = BoolGrid::Constant(bins, frames, false);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < bins; ++f) {
      if (field.silent(f, t)) {
        field.directionless(f, t) = true;
        continue;
      }
      const double sum = field.loudness_sum(f, t);
      field.r_value(f, t) = field.magnitude(f, t) / sum;
      if (field.magnitude(f, t) <= 1e-12 * sum) {
        field.directionless(f, t) = true;
      } else {
        field.angle(f, t) = wrap_angle(std::atan2(vy(f, t), vx(f, t)));
      }
    }
  }
  return field;
}

}  // namespace ilvsep
