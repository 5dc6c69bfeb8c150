// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cdtse::metrics {

namespace {

constexpr double kDbPerNeper = 10.0 / 2.302585092994045684;  // 10 / ln(10)

double Clamp(double db) { return std::clamp(db, -kClampDb, kClampDb); }

// Both energies are floored at kRatioEpsilon; above the floor the ratio is
// exact and therefore invariant to rescaling the estimate.
double GuardedDb(double signal_energy, double noise_energy) {
  return 10.0 * std::log10(std::max(signal_energy, kRatioEpsilon) /
                           std::max(noise_energy, kRatioEpsilon));
}

// Copies into Eigen-aligned storage: vectorized reductions over a Map of
// arbitrarily aligned memory change their summation order with the address,
// which would make results depend on heap layout.
Vector AsVector(std::span<const double> s) {
  return Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

void CheckPair(std::span<const double> reference, std::span<const double> estimate) {
  if (reference.size() != estimate.size())
    throw ShapeError("metric: reference and estimate lengths differ (" +
                     std::to_string(reference.size()) + " vs " +
                     std::to_string(estimate.size()) + ")");
  if (reference.size() < 2) throw ShapeError("metric: need at least 2 samples");
}

}  // namespace

double SiSdrWithGradient(std::span<const double> reference,
                         std::span<const double> estimate,
                         std::vector<double> *grad) {
  CheckPair(reference, estimate);
  const Vector x = AsVector(reference).array() - AsVector(reference).mean();
  const Vector y = AsVector(estimate).array() - AsVector(estimate).mean();
  const double xx = x.squaredNorm();
  if (xx == 0.0) throw ValueError("sisdr: reference is all zero after mean removal");
  const double scale = y.dot(x) / xx;
  const Vector target = scale * x;
  const Vector noise = y - target;
  const double num = target.squaredNorm();
  const double den = noise.squaredNorm();
  if (grad != nullptr) {
    // d num / dy = 2 target, d den / dy = 2 noise; a floored energy is
    // constant. Then undo the mean removal.
    Vector g = Vector::Zero(y.size());
    if (num > kRatioEpsilon) g += (2.0 * kDbPerNeper / num) * target;
    if (den > kRatioEpsilon) g -= (2.0 * kDbPerNeper / den) * noise;
    g.array() -= g.mean();
    grad->assign(g.data(), g.data() + g.size());
  }
  return GuardedDb(num, den);
}

double SiSdrUnclamped(std::span<const double> reference,
                      std::span<const double> estimate) {
  return SiSdrWithGradient(reference, estimate, nullptr);
}

double SiSdr(std::span<const double> reference, std::span<const double> estimate) {
  return Clamp(SiSdrUnclamped(reference, estimate));
}

double BssSdr(std::span<const double> reference, std::span<const double> estimate,
              int filter_taps) {
  CheckPair(reference, estimate);
  const Eigen::Index n = static_cast<Eigen::Index>(reference.size());
  const Eigen::Index k = filter_taps;
  if (filter_taps < 1) throw ValueError("bss_sdr: filter_taps must be >= 1");
  if (n <= k) throw ShapeError("bss_sdr: signal length must exceed filter_taps");
  auto r = AsVector(reference);
  auto e = AsVector(estimate);
  if (r.squaredNorm() == 0.0) throw ValueError("bss_sdr: reference is all zero");

  // Gram matrix of the truncated delayed references, G(i, j) =
  // sum_{t >= max(i, j)} r[t - i] r[t - j]. The first row is the
  // autocorrelation and each diagonal step drops one tail product.
  Matrix gram(k, k);
  for (Eigen::Index j = 0; j < k; ++j)
    gram(0, j) = r.segment(j, n - j).dot(r.head(n - j));
  for (Eigen::Index i = 1; i < k; ++i)
    for (Eigen::Index j = i; j < k; ++j)
      gram(i, j) = gram(i - 1, j - 1) - r[n - i] * r[n - j];
  gram.triangularView<Eigen::StrictlyLower>() = gram.transpose();

  Vector cross(k);
  for (Eigen::Index i = 0; i < k; ++i)
    cross[i] = e.segment(i, n - i).dot(r.head(n - i));

  Vector taps = gram.ldlt().solve(cross);
  if (!taps.allFinite() ||
      (gram * taps - cross).norm() > 1e-8 * std::max(cross.norm(), 1e-300)) {
    taps = gram.completeOrthogonalDecomposition().solve(cross);
  }

  Vector proj = Vector::Zero(n);
  for (Eigen::Index i = 0; i < k; ++i) proj.segment(i, n - i) += taps[i] * r.head(n - i);
  return Clamp(GuardedDb(proj.squaredNorm(), (e - proj).squaredNorm()));
}

double SiSdrImprovement(std::span<const double> reference,
                        std::span<const double> mixture_ref_channel,
                        std::span<const double> estimate) {
  return SiSdr(reference, estimate) - SiSdr(reference, mixture_ref_channel);
}

}  // namespace cdtse::metrics
