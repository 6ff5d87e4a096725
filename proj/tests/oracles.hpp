#pragma once

// Literal reference computations used by the unit tests and the acceptance
// binary. None of them calls the library kernel it checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pixground/grid.hpp"
#include "pixground/modality.hpp"
#include "pixground/raster.hpp"
#include "pixground/runtime.hpp"

namespace pixground::oracle {

/// Per-pixel minimum over every foreground pixel.
inline std::vector<double> brute_force_distance(const BinaryMask& m) {
  std::vector<std::pair<int, int>> fg;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(x, y)) fg.emplace_back(x, y);
    }
  }
  std::vector<double> out(m.size(), std::numeric_limits<double>::infinity());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      long best = std::numeric_limits<long>::max();
      for (auto [qx, qy] : fg) best = std::min(best, long(qx - x) * (qx - x) + long(qy - y) * (qy - y));
      if (!fg.empty()) out[std::size_t(y) * m.width() + x] = std::sqrt(double(best));
    }
  }
  return out;
}

/// Minimum distance between any pixel of `a` and any pixel of `b`.
inline double brute_force_pair_distance(const BinaryMask& a, const BinaryMask& b) {
  std::vector<std::pair<int, int>> pb;
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      if (b.at(x, y)) pb.emplace_back(x, y);
    }
  }
  long best = std::numeric_limits<long>::max();
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!a.at(x, y)) continue;
      for (auto [qx, qy] : pb) best = std::min(best, long(qx - x) * (qx - x) + long(qy - y) * (qy - y));
    }
  }
  return pb.empty() || best == std::numeric_limits<long>::max() ? std::numeric_limits<double>::infinity()
                                                                 : std::sqrt(double(best));
}

/// OR (take_max) or AND over the clipped 3x3 neighbourhood of every pixel.
inline BinaryMask neighbourhood_scan(const BinaryMask& m, bool take_max) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool v = !take_max;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
          v = take_max ? (v || m.at(nx, ny)) : (v && m.at(nx, ny));
        }
      }
      out.set(x, y, v);
    }
  }
  return out;
}

inline BinaryMask naive_dilate(const BinaryMask& m) { return neighbourhood_scan(m, true); }
inline BinaryMask naive_erode(const BinaryMask& m) { return neighbourhood_scan(m, false); }
inline BinaryMask naive_open(const BinaryMask& m) { return naive_dilate(naive_erode(m)); }

/// Foreground and total pixel counts per lattice cell, accumulated pixel by
/// pixel; a pixel at x belongs to the cell c with floor(c*w/n) <= x < floor((c+1)*w/n).
struct CellCounts {
  std::vector<long> fg;
  std::vector<long> total;
};
inline CellCounts cell_counts(const BinaryMask& m, const PatchLayout& l) {
  const int gr = l.grid_rows(), gc = l.grid_cols();
  CellCounts cc{std::vector<long>(std::size_t(gr) * gc, 0), std::vector<long>(std::size_t(gr) * gc, 0)};
  for (int y = 0; y < m.height(); ++y) {
    int r = 0;
    while (long(r + 1) * m.height() / gr <= y) ++r;
    for (int x = 0; x < m.width(); ++x) {
      int c = 0;
      while (long(c + 1) * m.width() / gc <= x) ++c;
      const std::size_t j = std::size_t(r) * gc + c;
      ++cc.total[j];
      if (m.at(x, y)) ++cc.fg[j];
    }
  }
  return cc;
}

/// Double loop with a max-shifted softmax per text token.
inline std::vector<double> naive_beta(const FeatureMatrix& v, const FeatureMatrix& q) {
  const int n = v.rows, l = q.rows, d = v.cols;
  std::vector<double> beta(std::size_t(n), 0.0);
  for (int t = 0; t < l; ++t) {
    std::vector<double> s(static_cast<std::size_t>(n));
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += v.data[std::size_t(j) * d + k] * q.data[std::size_t(t) * d + k];
      s[std::size_t(j)] = dot / std::sqrt(double(d));
      peak = std::max(peak, s[std::size_t(j)]);
    }
    double z = 0.0;
    for (double x : s) z += std::exp(x - peak);
    for (int j = 0; j < n; ++j) beta[std::size_t(j)] += std::exp(s[std::size_t(j)] - peak) / z / l;
  }
  return beta;
}

/// Sample covariance over the product of sample standard deviations.
inline double covariance_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my) / (n - 1);
    vx += (x[i] - mx) * (x[i] - mx) / (n - 1);
    vy += (y[i] - my) * (y[i] - my) / (n - 1);
  }
  return cov / std::sqrt(vx * vy);
}

/// The rows a trace should inject for `seg`, rebuilt from the provider and
/// the question embedding with the selection and fusion rules applied by hand.
inline FeatureSequence expected_injection(const SegEvent& seg, const FeatureProvider& features,
                                          const TextEmbeddings& question, int token_cap) {
  const BinaryMask mask = rle_decode(seg.mask);
  const PatchLayout layout = features.layout(seg.image_index);
  const CellCounts cc = cell_counts(mask, layout);
  TokenMask tok;
  tok.layout = layout;
  tok.coverage.assign(cc.fg.size(), 0.0);
  tok.selected.assign(cc.fg.size(), 0);
  for (std::size_t j = 0; j < cc.fg.size(); ++j) {
    tok.selected[j] = 2 * cc.fg[j] > cc.total[j] ? 1 : 0;
    if (cc.total[j] > 0) tok.coverage[j] = double(cc.fg[j]) / double(cc.total[j]);
  }
  const TokenSelection sel = spatial_uniform_sample(tok, token_cap);
  const bool both = features.has_modality(seg.image_index, Modality::optical) &&
                    features.has_modality(seg.image_index, Modality::sar);
  const Modality only = features.has_modality(seg.image_index, Modality::optical) ? Modality::optical : Modality::sar;
  std::vector<double> beta_opt, beta_sar;
  if (both) {
    beta_opt = naive_beta(features.features(seg.image_index, Modality::optical), question);
    beta_sar = naive_beta(features.features(seg.image_index, Modality::sar), question);
  }
  const int dim = features.features(seg.image_index, only).cols;
  FeatureSequence rows(int(sel.size()), dim);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const auto j = std::size_t(sel.indices[i]);
    Modality m = only;
    if (both) m = beta_opt[j] > beta_sar[j] ? Modality::optical : Modality::sar;
    const auto src = features.features(seg.image_index, m).row(int(j));
    std::copy(src.begin(), src.end(), rows.row(int(i)).begin());
  }
  return rows;
}

}  // namespace pixground::oracle
