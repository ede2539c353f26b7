/*
 * (C) Copyright 2026 The LEnKPF Authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lenkpf/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace lenkpf {

MixtureWeights::MixtureWeights(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
  if (alpha_.size() == 0) throw InvalidParameter("empty weight vector");
  for (Eigen::Index i = 0; i < alpha_.size(); ++i)
    if (!(alpha_(i) >= 0.0) || !std::isfinite(alpha_(i)))
      throw InvalidParameter("weights must be finite and nonnegative");
  const double total = alpha_.sum();
  if (!(total > 0.0)) throw DegenerateWeights("weights sum to zero");
  alpha_ /= total;
}

MixtureWeights MixtureWeights::from_log(const Eigen::VectorXd& log_w) {
  if (log_w.size() == 0) throw InvalidParameter("empty weight vector");
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top))
    throw DegenerateWeights("all log-weights are -inf or not finite");
  return MixtureWeights((log_w.array() - top).exp().matrix());
}

ResampleIndices ResampleIndices::identity(Eigen::Index k) {
  ResampleIndices out;
  out.idx.resize(static_cast<std::size_t>(k));
  std::iota(out.idx.begin(), out.idx.end(), Eigen::Index{0});
  return out;
}

std::vector<Eigen::Index> ResampleIndices::counts() const {
  std::size_t size = idx.size();
  for (auto j : idx) size = std::max(size, static_cast<std::size_t>(j) + 1);
  std::vector<Eigen::Index> n(size, 0);
  for (auto j : idx) ++n[static_cast<std::size_t>(j)];
  return n;
}

Eigen::Index ResampleIndices::fixed_points() const {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (idx[i] == static_cast<Eigen::Index>(i)) ++n;
  return n;
}

double ess(const MixtureWeights& w) { return 1.0 / w.alpha().squaredNorm(); }

MixtureWeights pf_weights(const Ensemble& ens, const GaussObs& obs,
                          double likelihood_power) {
  if (!(likelihood_power > 0.0 && likelihood_power <= 1.0))
    throw InvalidParameter("likelihood power must lie in (0, 1]");
  obs.check_dimension(ens.dimension());
  const Eigen::MatrixXd innov =
      (-obs.observe(ens.members())).rowwise() + obs.y().transpose();
  const Eigen::VectorXd inv_r = obs.r_diag().cwiseInverse();
  const Eigen::VectorXd log_l =
      -0.5 * likelihood_power * (innov.array().square().matrix() * inv_r);
  return MixtureWeights::from_log(log_l);
}

namespace {

constexpr double kSnap = 1e-9;

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < kSnap ? r : x;
}

bool is_balanced(const std::vector<Eigen::Index>& n, const MixtureWeights& w,
                 Eigen::Index draws) {
  const double k = static_cast<double>(draws);
  for (std::size_t j = 0; j < n.size(); ++j)
    if (!(std::abs(static_cast<double>(n[j]) - k * w.alpha()(static_cast<Eigen::Index>(j))) < 1.0))
      return false;
  return true;
}

ResampleIndices from_counts(const std::vector<Eigen::Index>& n) {
  ResampleIndices out;
  for (std::size_t j = 0; j < n.size(); ++j)
    for (Eigen::Index c = 0; c < n[j]; ++c)
      out.idx.push_back(static_cast<Eigen::Index>(j));
  return out;
}

// Integer parts first, then systematic sampling of the fractional parts.
// Used only when round-off pushed plain systematic sampling off balance.
std::vector<Eigen::Index> residual_systematic(const MixtureWeights& w,
                                              double offset, Eigen::Index k) {
  const Eigen::Index size = w.size();
  std::vector<Eigen::Index> n(static_cast<std::size_t>(size));
  std::vector<double> frac(static_cast<std::size_t>(size));
  Eigen::Index assigned = 0;
  for (Eigen::Index j = 0; j < size; ++j) {
    const double t = snap(static_cast<double>(k) * w.alpha()(j));
    const double f = std::floor(t);
    n[static_cast<std::size_t>(j)] = static_cast<Eigen::Index>(f);
    frac[static_cast<std::size_t>(j)] = t - f;
    assigned += static_cast<Eigen::Index>(f);
  }
  const Eigen::Index rest = k - assigned;
  std::vector<bool> taken(static_cast<std::size_t>(size), false);
  double cum = 0.0;
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < rest; ++i) {
    const double p = offset + static_cast<double>(i);
    while (j < frac.size() && cum + frac[j] <= p) cum += frac[j++];
    std::size_t pick = j;
    if (pick >= frac.size() || taken[pick]) {
      pick = frac.size();
      double best = -1.0;
      for (std::size_t q = 0; q < frac.size(); ++q)
        if (!taken[q] && frac[q] > best) best = frac[q], pick = q;
    } else {
      cum += frac[j++];
    }
    taken[pick] = true;
    ++n[pick];
  }
  return n;
}

}  // namespace

ResampleIndices balanced_resample(const MixtureWeights& w, double offset) {
  return balanced_resample(w, offset, w.size());
}

ResampleIndices balanced_resample(const MixtureWeights& w, double offset,
                                  Eigen::Index k) {
  if (!(offset >= 0.0 && offset < 1.0))
    throw InvalidParameter("resampling offset must lie in [0, 1)");
  if (k < 1) throw InvalidParameter("need at least one draw");
  std::vector<double> cum(static_cast<std::size_t>(w.size()));
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    acc += static_cast<long double>(k) * w.alpha()(j);
    cum[static_cast<std::size_t>(j)] = snap(static_cast<double>(acc));
  }
  cum.back() = static_cast<double>(k);

  std::vector<Eigen::Index> n(static_cast<std::size_t>(w.size()), 0);
  std::size_t j = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = offset + static_cast<double>(i);
    while (j + 1 < cum.size() && p >= cum[j]) ++j;
    ++n[j];
  }
  if (!is_balanced(n, w, k)) n = residual_systematic(w, offset, k);
  return from_counts(n);
}

ResampleIndices balanced_resample(const MixtureWeights& w, RandomStream& rng) {
  return balanced_resample(w, rng.uniform());
}

ResampleIndices reorder_to_match(const ResampleIndices& indices,
                                 const ResampleIndices& reference) {
  const std::size_t k = indices.idx.size();
  if (reference.idx.size() != k)
    throw ShapeError("reference index vector has a different length");
  std::vector<Eigen::Index> left = indices.counts();
  constexpr Eigen::Index kFree = -1;
  ResampleIndices out;
  out.idx.assign(k, kFree);
  for (std::size_t i = 0; i < k; ++i) {
    const auto want = reference.idx[i];
    if (want >= 0 && static_cast<std::size_t>(want) < k &&
        left[static_cast<std::size_t>(want)] > 0) {
      out.idx[i] = want;
      --left[static_cast<std::size_t>(want)];
    }
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (out.idx[i] != kFree) continue;
    while (left[next] == 0) ++next;
    out.idx[i] = static_cast<Eigen::Index>(next);
    --left[next];
  }
  return out;
}

ResampleIndices permute_fixed_points(const ResampleIndices& indices) {
  return reorder_to_match(indices, ResampleIndices::identity(indices.size()));
}

}  // namespace lenkpf
