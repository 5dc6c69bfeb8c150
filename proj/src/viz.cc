// Copyright 2026 The cdtse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cdtse/viz.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdtse/spatial.h"
#include "cdtse/tasnet.h"

namespace cdtse::viz {

namespace fs = std::filesystem;

CdViews ComputeCdViews(const Checkpoint &ckpt, const MultichannelMixture &mix,
                       bool same_encoding) {
  const ModelConfig &cfg = ckpt.config;
  if (cfg.spatial_mode != SpatialMode::kCd && cfg.spatial_mode != SpatialMode::kCdAdapt)
    throw ValueError("visualize needs a cd or cd+adapt checkpoint, got " +
                     SpatialModeName(cfg.spatial_mode));
  if (mix.NumChannels() != 2)
    throw ShapeError("mode " + SpatialModeName(cfg.spatial_mode) + " needs 2 channels, got " +
                     std::to_string(mix.NumChannels()));
  CdViews v;
  v.w1 = tasnet::Encode(mix.Channel(0), ckpt.params, cfg, 0);
  v.w2 = same_encoding ? v.w1 : tasnet::Encode(mix.Channel(1), ckpt.params, cfg, 1);
  v.scores = Vector::Ones(v.w1.rows()) -
             spatial::PairwiseSoftmax(spatial::RowCosine(v.w1, v.w2));
  v.wcd = spatial::ChannelDecorrelate(v.w1, v.w2);
  return v;
}

Image Heatmap(const Matrix &m, double vmax, int cell) {
  if (cell < 1) throw ValueError("heatmap cell size must be >= 1");
  Image img;
  img.width = static_cast<int>(m.cols()) * cell;
  img.height = static_cast<int>(m.rows()) * cell;
  img.rgb.resize(static_cast<size_t>(img.width) * img.height * 3);
  const double scale = vmax > 0.0 ? vmax : 1.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double t = std::clamp(m(y / cell, x / cell) / scale, -1.0, 1.0);
      // white at zero, saturating to red (positive) or blue (negative)
      const auto fade = static_cast<unsigned char>(std::lround(255.0 * (1.0 - std::abs(t))));
      unsigned char *px = &img.rgb[(static_cast<size_t>(y) * img.width + x) * 3];
      px[0] = t < 0 ? fade : 255;
      px[1] = fade;
      px[2] = t > 0 ? fade : 255;
    }
  }
  return img;
}

Image BarChart(const Vector &v, int bar, int height) {
  if (bar < 1 || height < 1) throw ValueError("bar chart dimensions must be positive");
  Image img;
  img.width = static_cast<int>(v.size()) * bar;
  img.height = height;
  img.rgb.assign(static_cast<size_t>(img.width) * height * 3, 255);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const int h = static_cast<int>(std::lround(std::clamp(v(i), 0.0, 1.0) * height));
    for (int y = height - h; y < height; ++y)
      for (int x = static_cast<int>(i) * bar; x < (static_cast<int>(i) + 1) * bar - 1; ++x) {
        unsigned char *px = &img.rgb[(static_cast<size_t>(y) * img.width + x) * 3];
        px[0] = 40, px[1] = 90, px[2] = 160;
      }
  }
  return img;
}

void WritePpm(const fs::path &path, const Image &img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char *>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void WriteMatrixCsv(const fs::path &path, const Matrix &m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

Matrix ReadMatrixCsv(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ShapeError(path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

std::vector<fs::path> WriteCdViews(const CdViews &views, const fs::path &dir) {
  fs::create_directories(dir);
  const double vmax = std::max({views.w1.cwiseAbs().maxCoeff(), views.w2.cwiseAbs().maxCoeff(),
                                views.wcd.cwiseAbs().maxCoeff()});
  std::vector<fs::path> written;
  const std::pair<const char *, const Matrix *> maps[] = {
      {"w1", &views.w1}, {"w2", &views.w2}, {"wcd", &views.wcd}};
  for (const auto &[name, m] : maps) {
    written.push_back(dir / (std::string(name) + ".ppm"));
    WritePpm(written.back(), Heatmap(*m, vmax));
    written.push_back(dir / (std::string(name) + ".csv"));
    WriteMatrixCsv(written.back(), *m);
  }
  written.push_back(dir / "scores.ppm");
  WritePpm(written.back(), BarChart(views.scores));
  written.push_back(dir / "scores.csv");
  WriteMatrixCsv(written.back(), views.scores);
  return written;
}

}  // namespace cdtse::viz
