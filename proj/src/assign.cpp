#include "ilvsep/assign.hpp"

#include "ilvsep/error.hpp"
#include "ilvsep/transform.hpp"

#include <cmath>
#include <numbers>

namespace ilvsep {

std::string ChannelSumRule::to_string() const {
  std::string s = kind == Kind::Single ? "single(" : kind == Kind::Pair ? "pair(" : "triple(";
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(channels[i]);
  }
  return s + ")";
}

ChannelSumRule single_rule(int i, const ChannelLayout& layout) {
  return {ChannelSumRule::Kind::Single, {layout.wrap(i)}};
}

ChannelSumRule pair_rule(int i, const ChannelLayout& layout) {
  return {ChannelSumRule::Kind::Pair, {layout.wrap(i), layout.wrap(i + 1)}};
}

ChannelSumRule triple_rule(int i, const ChannelLayout& layout) {
  return {ChannelSumRule::Kind::Triple, {layout.wrap(i - 1), layout.wrap(i), layout.wrap(i + 1)}};
}

AssignOptions resolve(const AssignOptions& options, const ChannelLayout& layout) {
  AssignOptions out = options;
  if (out.axis_tol < 0.0) out.axis_tol = layout.theta_v / 8.0;
  if (out.r_single_tol < 0.0) out.r_single_tol = (1.0 - ideal_r(3, layout.theta_v)) / 2.0;
  if (out.merge_tol < 0.0) out.merge_tol = layout.theta_v / 4.0;
  return out;
}

ChannelSumRule rule_for_component(double mean_angle, double mean_r, const ChannelLayout& layout,
                                  double axis_tol, double r_single_tol) {
  const double angle = wrap_angle(mean_angle);
  const int nearest = layout.wrap(static_cast<int>(std::lround(angle / layout.theta_v)));
  if (std::abs(wrap_difference(angle - layout.axis_angle_rad[nearest])) <= axis_tol) {
    return std::abs(mean_r - 1.0) <= r_single_tol ? single_rule(nearest, layout) : triple_rule(nearest, layout);
  }
  return pair_rule(static_cast<int>(std::floor(angle / layout.theta_v)), layout);
}

AssignmentMap assign_bins(const IlvsField& field, const VonMisesMixture& mixture, const BoolGrid& eligible) {
  if (eligible.rows() != field.num_bins() || eligible.cols() != field.num_frames()) {
    throw Error("eligibility mask does not match the ILVS field");
  }
  const int k = mixture.size();
  AssignmentMap map;
  map.component = Eigen::MatrixXi::Constant(field.num_bins(), field.num_frames(), -1);
  map.components.resize(static_cast<std::size_t>(k));
  std::vector<double> r_acc(static_cast<std::size_t>(k), 0.0);

  for (Eigen::Index t = 0; t < field.num_frames(); ++t) {
    for (Eigen::Index f = 0; f < field.num_bins(); ++f) {
      if (!eligible(f, t) || field.silent(f, t) || field.directionless(f, t)) continue;
      const Eigen::VectorXd gamma = vm_responsibilities(mixture, field.angle(f, t));
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < k; ++j) {
        if (gamma[j] > gamma[best]) best = j;
      }
      map.component(f, t) = static_cast<int>(best);
      auto& c = map.components[static_cast<std::size_t>(best)];
      c.bin_count += 1;
      const double mass = gamma[best] * field.loudness_sum(f, t) * field.loudness_sum(f, t);
      c.responsibility_mass += mass;
      r_acc[static_cast<std::size_t>(best)] += mass * field.r_value(f, t);
    }
  }
  for (int j = 0; j < k; ++j) {
    auto& c = map.components[static_cast<std::size_t>(j)];
    c.mean_angle = mixture.means[j];
    c.weight = mixture.weights[j];
    c.mean_r = c.responsibility_mass > 0.0 ? r_acc[static_cast<std::size_t>(j)] / c.responsibility_mass : 0.0;
  }
  return map;
}

void attach_rules(AssignmentMap& map, const ChannelLayout& layout, const AssignOptions& options) {
  const AssignOptions opt = resolve(options, layout);
  for (auto& c : map.components) {
    c.rule = rule_for_component(c.mean_angle, c.mean_r, layout, opt.axis_tol, opt.r_single_tol);
  }

  // Union components with equal rules and nearby means into the lowest index.
  const auto k = map.components.size();
  std::vector<int> target(k);
  for (std::size_t j = 0; j < k; ++j) {
    target[j] = static_cast<int>(j);
    for (std::size_t i = 0; i < j; ++i) {
      if (target[i] != static_cast<int>(i)) continue;
      const auto& a = map.components[i];
      const auto& b = map.components[j];
      if (a.rule == b.rule && std::abs(wrap_difference(a.mean_angle - b.mean_angle)) <= opt.merge_tol) {
        target[j] = static_cast<int>(i);
        break;
      }
    }
  }

  std::vector<ComponentAssignment> merged;
  std::vector<int> new_index(k, -1);
  for (std::size_t j = 0; j < k; ++j) {
    if (target[j] != static_cast<int>(j)) continue;
    ComponentAssignment acc = map.components[j];
    double cx = acc.weight * std::cos(acc.mean_angle), cy = acc.weight * std::sin(acc.mean_angle);
    double r_mass = acc.mean_r * acc.responsibility_mass;
    for (std::size_t i = j + 1; i < k; ++i) {
      if (target[i] != static_cast<int>(j)) continue;
      const auto& o = map.components[i];
      acc.weight += o.weight;
      acc.bin_count += o.bin_count;
      acc.responsibility_mass += o.responsibility_mass;
      r_mass += o.mean_r * o.responsibility_mass;
      cx += o.weight * std::cos(o.mean_angle);
      cy += o.weight * std::sin(o.mean_angle);
    }
    if (acc.bin_count == 0) continue;
    if (acc.responsibility_mass > 0.0) acc.mean_r = r_mass / acc.responsibility_mass;
    if (cx != 0.0 || cy != 0.0) acc.mean_angle = wrap_angle(std::atan2(cy, cx));
    new_index[j] = static_cast<int>(merged.size());
    merged.push_back(std::move(acc));
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (target[j] != static_cast<int>(j)) new_index[j] = new_index[static_cast<std::size_t>(target[j])];
  }
  map.component = map.component.unaryExpr([&](int c) { return c < 0 ? -1 : new_index[static_cast<std::size_t>(c)]; });
  map.components = std::move(merged);
}

Eigen::MatrixXd source_grid(const std::vector<Eigen::MatrixXd>& noncommon, const AssignmentMap& map, int k) {
  if (noncommon.empty()) throw Error("no non-common channels");
  const auto& rule = map.components.at(static_cast<std::size_t>(k)).rule;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(noncommon.front().rows(), noncommon.front().cols());
  if (map.component.rows() != sum.rows() || map.component.cols() != sum.cols()) {
    throw Error("assignment map does not match the TF grids");
  }
  for (int c : rule.channels) sum += noncommon.at(static_cast<std::size_t>(c));
  return (map.component.array() == k).select(sum, 0.0);
}

std::vector<Eigen::VectorXd> reconstruct_sources(const std::vector<Eigen::MatrixXd>& noncommon,
                                                 const AssignmentMap& map, int frame_len,
                                                 Eigen::Index length) {
  std::vector<Eigen::VectorXd> stems;
  for (std::size_t k = 0; k < map.components.size(); ++k) {
    stems.push_back(mdct_synthesize(source_grid(noncommon, map, static_cast<int>(k)), frame_len, length));
  }
  return stems;
}

}  // namespace ilvsep
