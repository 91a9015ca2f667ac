#include "ilvsep/transform.hpp"

#include "ilvsep/error.hpp"

namespace ilvsep {
namespace {

void check_frame_len(int frame_len) {
  if (frame_len < 64 || frame_len % 2 != 0) {
    throw ConfigError("frame_len must be even and >= 64, got " + std::to_string(frame_len));
  }
}

}  // namespace

Eigen::Index mdct_num_frames(Eigen::Index length, int frame_len) {
  return (length + frame_len - 1) / frame_len + 1;
}

Eigen::MatrixXd mdct_analyze(const Eigen::Ref<const Eigen::VectorXd>& signal, int frame_len) {
  check_frame_len(frame_len);
  if (signal.size() == 0) throw Error("cannot transform an empty signal");
  const Eigen::Index frames = mdct_num_frames(signal.size(), frame_len);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero((frames + 1) * frame_len);
  padded.segment(frame_len, signal.size()) = signal;

  const MdctPlan<double> plan(frame_len);
  Eigen::MatrixXd grid(frame_len, frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    plan.forward(padded.data() + t * frame_len, grid.col(t).data());
  }
  return grid;
}

Eigen::VectorXd mdct_synthesize(const Eigen::Ref<const Eigen::MatrixXd>& grid, int frame_len,
                                Eigen::Index length) {
  check_frame_len(frame_len);
  if (grid.rows() != frame_len) throw Error("grid height does not match frame_len");
  if (grid.cols() != mdct_num_frames(length, frame_len)) {
    throw Error("grid frame count does not match signal length");
  }
  const MdctPlan<double> plan(frame_len);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero((grid.cols() + 1) * frame_len);
  Eigen::VectorXd column(frame_len);
  for (Eigen::Index t = 0; t < grid.cols(); ++t) {
    column = grid.col(t);
    plan.inverse_add(column.data(), padded.data() + t * frame_len);
  }
  return padded.segment(frame_len, length);
}

TfTensor mdct_forward(const MultichannelAudio& audio, int frame_len) {
  check_frame_len(frame_len);
  if (audio.num_channels() == 0 || audio.num_samples() == 0) {
    throw Error("cannot transform empty audio");
  }
  TfTensor tf;
  tf.frame_len = frame_len;
  tf.sample_rate = audio.sample_rate;
  tf.signal_length = audio.num_samples();
  tf.coeffs.reserve(static_cast<std::size_t>(audio.num_channels()));
  for (Eigen::Index c = 0; c < audio.num_channels(); ++c) {
    tf.coeffs.push_back(mdct_analyze(audio.channels.row(c).transpose(), frame_len));
  }
  return tf;
}

MultichannelAudio mdct_inverse(const TfTensor& tf) {
  if (tf.coeffs.empty()) throw Error("empty TF tensor");
  for (const auto& g : tf.coeffs) {
    if (g.rows() != tf.coeffs.front().rows() || g.cols() != tf.coeffs.front().cols()) {
      throw Error("inconsistent TF grid dimensions across channels");
    }
  }
  MultichannelAudio audio;
  audio.sample_rate = tf.sample_rate;
  audio.channels.resize(tf.num_channels(), tf.signal_length);
  for (int c = 0; c < tf.num_channels(); ++c) {
    audio.channels.row(c) = mdct_synthesize(tf.coeffs[c], tf.frame_len, tf.signal_length).transpose();
  }
  return audio;
}

}  // namespace ilvsep
