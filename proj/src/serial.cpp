#include "pixground/serial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pixground/error.hpp"

namespace pixground::serial {

namespace {

BinaryMask scan3x3(const BinaryMask& mask, bool dilation) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool any = false;
      bool all = true;
      for (int ny = std::max(y - 1, 0); ny <= std::min(y + 1, h - 1); ++ny) {
        for (int nx = std::max(x - 1, 0); nx <= std::min(x + 1, w - 1); ++nx) {
          any = any || mask.at(nx, ny);
          all = all && mask.at(nx, ny);
        }
      }
      out.set(x, y, dilation ? any : all);
    }
  }
  return out;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> envelope_1d(const std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  std::vector<int> sites;
  std::vector<double> bounds;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (sites.empty()) {
      sites.push_back(q);
      bounds = {-kInf, kInf};
      continue;
    }
    double s = 0.0;
    while (true) {
      const int v = sites.back();
      s = ((f[q] + double(q) * q) - (f[v] + double(v) * v)) / (2.0 * (q - v));
      if (s > bounds[sites.size() - 1]) break;
      sites.pop_back();
      bounds.pop_back();
    }
    bounds.back() = s;
    sites.push_back(q);
    bounds.push_back(kInf);
  }
  std::vector<double> d(f.size(), kInf);
  if (sites.empty()) return d;
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    while (bounds[k + 1] < q) ++k;
    const double dq = double(q) - sites[k];
    d[q] = dq * dq + f[sites[k]];
  }
  return d;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask) { return scan3x3(mask, true); }
BinaryMask erode(const BinaryMask& mask) { return scan3x3(mask, false); }
BinaryMask open(const BinaryMask& mask) { return serial::dilate(serial::erode(mask)); }

DistanceField distance_transform(const BinaryMask& mask) {
  if (mask.none()) throw Error(ErrorCode::empty_source, "distance transform of an empty mask");
  const int w = mask.width();
  const int h = mask.height();
  DistanceField field{w, h, std::vector<double>(mask.size(), kInf)};
  std::vector<double> column(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) column[y] = mask.at(x, y) ? 0.0 : kInf;
    const auto d = envelope_1d(column);
    for (int y = 0; y < h; ++y) field.values[std::size_t(y) * w + x] = d[y];
  }
  std::vector<double> row(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = field.values[std::size_t(y) * w + x];
    const auto d = envelope_1d(row);
    for (int x = 0; x < w; ++x) field.values[std::size_t(y) * w + x] = std::sqrt(d[x]);
  }
  return field;
}

TokenMask downsample_mask(const BinaryMask& mask, const PatchLayout& layout) {
  validate(layout);
  if (mask.width() != layout.image_width || mask.height() != layout.image_height) {
    throw Error(ErrorCode::dimension_mismatch, "mask and layout image sizes differ");
  }
  TokenMask tok;
  tok.layout = layout;
  const int rows = layout.grid_rows();
  const int cols = layout.grid_cols();
  tok.coverage.assign(std::size_t(rows) * cols, 0.0);
  tok.selected.assign(std::size_t(rows) * cols, 0);
  for (int r = 0; r < rows; ++r) {
    const CellSpan ys = cell_span(r, mask.height(), rows);
    for (int c = 0; c < cols; ++c) {
      const CellSpan xs = cell_span(c, mask.width(), cols);
      long pixels = 0;
      long fg = 0;
      for (int y = ys.begin; y < ys.end; ++y) {
        for (int x = xs.begin; x < xs.end; ++x) {
          ++pixels;
          fg += mask.at(x, y);
        }
      }
      if (pixels == 0) continue;
      const auto j = std::size_t(r) * cols + c;
      tok.coverage[j] = double(fg) / double(pixels);
      tok.selected[j] = 2 * fg > pixels;
    }
  }
  return tok;
}

RelevanceField relevance_scores(const TokenFeatures& visual, const TextEmbeddings& text,
                                Modality modality) {
  if (visual.cols != text.cols) throw Error(ErrorCode::dimension_mismatch, "feature dims differ");
  if (visual.rows < 1 || text.rows < 1 || visual.cols < 1) {
    throw Error(ErrorCode::invalid_argument, "relevance_scores needs N, L, D >= 1");
  }
  const int n = visual.rows;
  const int l_count = text.rows;
  const double root_d = std::sqrt(double(visual.cols));
  std::vector<std::vector<double>> logits(n, std::vector<double>(l_count));
  for (int j = 0; j < n; ++j) {
    for (int l = 0; l < l_count; ++l) {
      double dot = 0.0;
      for (int d = 0; d < visual.cols; ++d) dot += visual.row(j)[d] * text.row(l)[d];
      logits[j][l] = dot / root_d;
    }
  }
  RelevanceField field{modality, std::vector<double>(n, 0.0)};
  for (int l = 0; l < l_count; ++l) {
    double peak = -kInf;
    for (int j = 0; j < n; ++j) peak = std::max(peak, logits[j][l]);
    double total = 0.0;
    for (int j = 0; j < n; ++j) total += std::exp(logits[j][l] - peak);
    for (int j = 0; j < n; ++j) field.beta[j] += std::exp(logits[j][l] - peak) / total / l_count;
  }
  return field;
}

}  // namespace pixground::serial
