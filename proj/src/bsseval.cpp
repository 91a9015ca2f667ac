#include "ilvsep/bsseval.hpp"

#include "ilvsep/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace ilvsep {
namespace {

double ratio_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kMetricCapDb : -kMetricCapDb;
  if (num <= 0.0) return -kMetricCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kMetricCapDb, kMetricCapDb);
}

Eigen::Index common_length(const Eigen::VectorXd& estimate, const std::vector<Eigen::VectorXd>& refs) {
  Eigen::Index n = estimate.size();
  for (const auto& r : refs) n = std::min(n, r.size());
  return n;
}

}  // namespace

Decomposition decompose(const Eigen::VectorXd& estimate, const std::vector<Eigen::VectorXd>& references,
                        int target) {
  if (references.empty()) throw Error("decompose needs at least one reference");
  if (target < 0 || target >= static_cast<int>(references.size())) throw Error("target index out of range");
  const Eigen::Index n = common_length(estimate, references);
  const Eigen::VectorXd e = estimate.head(n);
  if (e.squaredNorm() == 0.0) throw Error("zero-energy estimate");

  Eigen::MatrixXd refs(n, static_cast<Eigen::Index>(references.size()));
  for (std::size_t j = 0; j < references.size(); ++j) {
    refs.col(static_cast<Eigen::Index>(j)) = references[j].head(n);
    if (refs.col(static_cast<Eigen::Index>(j)).squaredNorm() == 0.0) throw Error("zero-energy reference");
  }

  // Target first, so the leading Householder vector spans it and the remaining
  // ones span the rest of the reference subspace orthogonally to it.
  if (target != 0) refs.col(0).swap(refs.col(target));
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(refs);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, refs.cols());
  const Eigen::VectorXd c = q.transpose() * e;
  Decomposition d;
  d.target = c[0] * q.col(0);
  d.interference = q.rightCols(refs.cols() - 1) * c.tail(refs.cols() - 1);
  d.artifacts = e - d.target - d.interference;
  return d;
}

Metrics sdr_sir_sar(const Decomposition& d) {
  const double st = d.target.squaredNorm();
  return {ratio_db(st, (d.interference + d.artifacts).squaredNorm()), ratio_db(st, d.interference.squaredNorm()),
          ratio_db((d.target + d.interference).squaredNorm(), d.artifacts.squaredNorm())};
}

StemMatch match_stems(const std::vector<Eigen::VectorXd>& estimates,
                      const std::vector<Eigen::VectorXd>& references, std::size_t matchable) {
  const auto ne = estimates.size();
  const auto nr = std::min(matchable, references.size());
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  // SIR saturates when no other reference explains the estimate, so SDR breaks ties.
  using Score = std::pair<double, double>;
  const Score none{kNone, kNone};
  std::vector<std::vector<Score>> score(ne, std::vector<Score>(nr, none));
  for (std::size_t i = 0; i < ne; ++i) {
    if (estimates[i].squaredNorm() == 0.0) continue;
    for (std::size_t j = 0; j < nr; ++j) {
      const Decomposition d = decompose(estimates[i], references, static_cast<int>(j));
      // Stems without any projection on the reference cannot be matched to it.
      if (d.target.squaredNorm() > 0.0) {
        const Metrics mt = sdr_sir_sar(d);
        score[i][j] = {mt.sir, mt.sdr};
      }
    }
  }

  StemMatch m;
  m.reference_of.assign(ne, -1);
  std::vector<bool> ref_used(nr, false);
  for (;;) {
    Score best = none;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < ne; ++i) {
      if (m.reference_of[i] >= 0) continue;
      for (std::size_t j = 0; j < nr; ++j) {
        if (!ref_used[j] && score[i][j] > best) {
          best = score[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    if (best.first == kNone) break;
    m.reference_of[bi] = static_cast<int>(bj);
    ref_used[bj] = true;
  }
  for (std::size_t i = 0; i < ne; ++i) {
    if (m.reference_of[i] < 0) m.spurious.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < nr; ++j) {
    if (!ref_used[j]) m.missed.push_back(static_cast<int>(j));
  }
  return m;
}

EvalReport evaluate(const std::vector<NamedSignal>& object_estimates, const NamedSignal* common_estimate,
                    const std::vector<NamedSignal>& object_references, const NamedSignal* common_reference) {
  std::vector<Eigen::VectorXd> refs;
  for (const auto& r : object_references) refs.push_back(r.signal);
  if (common_reference != nullptr) refs.push_back(common_reference->signal);

  std::vector<Eigen::VectorXd> est;
  for (const auto& e : object_estimates) est.push_back(e.signal);
  const StemMatch match = match_stems(est, refs, object_references.size());

  EvalReport report;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const int j = match.reference_of[i];
    if (j < 0) continue;
    StemScore row;
    row.stem = object_estimates[i].name;
    row.reference = object_references[static_cast<std::size_t>(j)].name;
    row.estimate_index = static_cast<int>(i);
    row.reference_index = j;
    row.metrics = sdr_sir_sar(decompose(est[i], refs, j));
    report.noncommon_mean.sdr += row.metrics.sdr;
    report.noncommon_mean.sir += row.metrics.sir;
    report.noncommon_mean.sar += row.metrics.sar;
    report.rows.push_back(std::move(row));
  }
  report.noncommon_count = static_cast<int>(report.rows.size());
  if (report.noncommon_count > 0) {
    report.noncommon_mean.sdr /= report.noncommon_count;
    report.noncommon_mean.sir /= report.noncommon_count;
    report.noncommon_mean.sar /= report.noncommon_count;
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const StemScore& a, const StemScore& b) { return a.reference_index < b.reference_index; });
  for (int i : match.spurious) report.spurious.push_back(object_estimates[static_cast<std::size_t>(i)].name);
  for (int j : match.missed) report.missed.push_back(object_references[static_cast<std::size_t>(j)].name);

  if (common_estimate != nullptr && common_reference != nullptr) {
    StemScore row;
    row.stem = common_estimate->name;
    row.reference = common_reference->name;
    row.reference_index = static_cast<int>(refs.size()) - 1;
    row.common = true;
    row.metrics = sdr_sir_sar(decompose(common_estimate->signal, refs, row.reference_index));
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace ilvsep
