#pragma once

#include "ilvsep/transform.hpp"
#include "ilvsep/wavio.hpp"

#include <Eigen/Dense>

namespace ilvsep {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-bin inter-channel loudness vector sum V(f, t) = sum_i |X_i| (cos theta_i, sin theta_i).
struct IlvsField {
  Eigen::MatrixXd magnitude;     ///< |V|
  Eigen::MatrixXd angle;         ///< direction of V in [0, 2pi); 0 where undefined
  Eigen::MatrixXd r_value;       ///< |V| / sum_i |X_i|
  Eigen::MatrixXd loudness_sum;  ///< sum_i |X_i|
  BoolGrid silent;               ///< loudness below the global silence floor
  BoolGrid directionless;        ///< |V| vanishes relative to the loudness sum

  Eigen::Index num_bins() const { return magnitude.rows(); }
  Eigen::Index num_frames() const { return magnitude.cols(); }
};

/// Relative floor (w.r.t. the largest loudness sum) below which a bin is silent.
inline constexpr double kSilentFloor = 1e-12;

IlvsField compute_ilvs(const TfTensor& tf, const ChannelLayout& layout);

/// Ideal R for equal loudness on 1, 2 or 3 adjacent channels.
double ideal_r(int multiplicity, double theta_v);

/// Maps any angle into [0, 2pi).
double wrap_angle(double theta);
/// Maps any angle difference into (-pi, pi].
double wrap_difference(double delta);

}  // namespace ilvsep
