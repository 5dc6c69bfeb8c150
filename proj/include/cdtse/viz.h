// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef CDTSE_VIZ_H_
#define CDTSE_VIZ_H_

#include <filesystem>
#include <string>
#include <vector>

#include "cdtse/checkpoint.h"
#include "cdtse/signal.h"

namespace cdtse::viz {

// Encoder views of one mixture under a decorrelation checkpoint.
struct CdViews {
  Matrix w1, w2, wcd;  // N x T
  Vector scores;       // per-dimension weight applied to W2
};

// Throws ValueError unless the checkpoint is in a cd mode, ShapeError on a
// channel mismatch. With `same_encoding` the second channel's encoding is
// replaced by W1, which pins every score to 1/2.
CdViews ComputeCdViews(const Checkpoint &ckpt, const MultichannelMixture &mix,
                       bool same_encoding = false);

// 8-bit RGB image.
struct Image {
  int width = 0, height = 0;
  std::vector<unsigned char> rgb;  // row-major, 3 bytes per pixel
};

// Diverging blue-white-red map of values in [-vmax, vmax]; one `cell` x
// `cell` block per entry, row 0 at the top.
Image Heatmap(const Matrix &m, double vmax, int cell = 4);
// One vertical bar per value in [0, 1], `bar` pixels wide.
Image BarChart(const Vector &v, int bar = 8, int height = 128);

void WritePpm(const std::filesystem::path &path, const Image &img);
// Comma-separated rows at full precision.
void WriteMatrixCsv(const std::filesystem::path &path, const Matrix &m);
Matrix ReadMatrixCsv(const std::filesystem::path &path);

// Writes w1, w2, wcd and scores as .ppm and .csv under `dir`, the heatmaps on
// one colour scale (the largest magnitude over all three). Returns the paths.
std::vector<std::filesystem::path> WriteCdViews(const CdViews &views,
                                                const std::filesystem::path &dir);

}  // namespace cdtse::viz

#endif  // CDTSE_VIZ_H_
