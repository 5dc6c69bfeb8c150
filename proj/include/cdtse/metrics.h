// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_METRICS_H_
#define CDTSE_METRICS_H_

#include <span>
#include <vector>

#include "cdtse/common.h"

namespace cdtse::metrics {

// Reported values are clamped to +-kClampDb; both energies in the log ratio
// are floored at kRatioEpsilon.
inline constexpr double kClampDb = 120.0;
inline constexpr double kRatioEpsilon = 1e-12;
inline constexpr int kDefaultFilterTaps = 512;

// Scale-invariant SDR in dB after removing the mean of both signals.
double SiSdr(std::span<const double> reference, std::span<const double> estimate);

// Same quantity without the +-kClampDb clamp.
double SiSdrUnclamped(std::span<const double> reference,
                      std::span<const double> estimate);

// Unclamped SiSDR and its gradient with respect to the estimate.
double SiSdrWithGradient(std::span<const double> reference,
                         std::span<const double> estimate,
                         std::vector<double> *grad);

// BSSEval-style SDR: the allowed distortion is the least-squares projection
// of the estimate onto `filter_taps` delayed copies of the reference.
double BssSdr(std::span<const double> reference, std::span<const double> estimate,
              int filter_taps = kDefaultFilterTaps);

double SiSdrImprovement(std::span<const double> reference,
                        std::span<const double> mixture_ref_channel,
                        std::span<const double> estimate);

}  // namespace cdtse::metrics

#endif  // CDTSE_METRICS_H_
