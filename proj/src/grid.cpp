#include "pixground/grid.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>

#include "pixground/error.hpp"

namespace pixground {

void validate(const PatchLayout& layout) {
  if (layout.rows < 1 || layout.cols < 1 || layout.tokens_per_side < 1 || layout.image_width < 1 ||
      layout.image_height < 1) {
    throw Error(ErrorCode::invalid_argument, "patch layout counts and image size must be positive");
  }
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// |log(a/b)| ordering without floating point: compares max(a,b)/min(a,b).
struct Ratio {
  std::int64_t num;
  std::int64_t den;
};

Ratio skew(std::int64_t a, std::int64_t b) { return a >= b ? Ratio{a, b} : Ratio{b, a}; }

bool less(const Ratio& x, const Ratio& y) { return x.num * y.den < y.num * x.den; }
bool equal(const Ratio& x, const Ratio& y) { return x.num * y.den == y.num * x.den; }

}  // namespace

PatchLayout plan_patches(int image_width, int image_height, int tile_size, int max_tiles,
                         int tokens_per_side) {
  if (image_width < 1 || image_height < 1 || tile_size < 1 || max_tiles < 1 || tokens_per_side < 1) {
    throw Error(ErrorCode::invalid_argument, "plan_patches: dimensions and counts must be positive");
  }
  int rows = ceil_div(image_height, tile_size);
  int cols = ceil_div(image_width, tile_size);
  if (rows * static_cast<std::int64_t>(cols) > max_tiles) {
    // Best aspect-ratio fit among grids with at most max_tiles tiles; ties go
    // to more tiles, then fewer rows.
    int best_r = 1;
    int best_c = 1;
    Ratio best = skew(std::int64_t(image_height), std::int64_t(image_width));
    for (int r = 1; r <= max_tiles; ++r) {
      for (int c = 1; r * c <= max_tiles; ++c) {
        // Grid aspect c/r against image aspect w/h.
        const Ratio d = skew(std::int64_t(c) * image_height, std::int64_t(r) * image_width);
        if (less(d, best) || (equal(d, best) && r * c > best_r * best_c)) {
          best = d;
          best_r = r;
          best_c = c;
        }
      }
    }
    rows = best_r;
    cols = best_c;
  }
  PatchLayout layout;
  layout.rows = rows;
  layout.cols = cols;
  layout.tokens_per_side = tokens_per_side;
  layout.has_thumbnail = rows * cols > 1;
  layout.image_width = image_width;
  layout.image_height = image_height;
  return layout;
}

CellSpan cell_span(int k, int extent, int cells) noexcept {
  const auto e = static_cast<std::int64_t>(extent);
  return {static_cast<int>(k * e / cells), static_cast<int>((k + 1) * e / cells)};
}

std::size_t TokenMask::selected_count() const noexcept {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

TokenMask downsample_mask(const BinaryMask& mask, const PatchLayout& layout) {
  validate(layout);
  if (mask.width() != layout.image_width || mask.height() != layout.image_height) {
    throw Error(ErrorCode::dimension_mismatch,
                "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                    " but layout expects " + std::to_string(layout.image_width) + "x" +
                    std::to_string(layout.image_height));
  }
  const int w = mask.width();
  const int h = mask.height();
  const int grid_rows = layout.grid_rows();
  const int grid_cols = layout.grid_cols();

  TokenMask tok;
  tok.layout = layout;
  tok.coverage.assign(std::size_t(layout.tile_token_count()), 0.0);
  tok.selected.assign(std::size_t(layout.tile_token_count()), 0);
  const auto bits = mask.bits();

  // One cell per iteration; each cell sums contiguous row segments.
#pragma omp parallel for collapse(2) schedule(static)
  for (int r = 0; r < grid_rows; ++r) {
    for (int c = 0; c < grid_cols; ++c) {
      const CellSpan ys = cell_span(r, h, grid_rows);
      const CellSpan xs = cell_span(c, w, grid_cols);
      const std::int64_t pixels = std::int64_t(ys.end - ys.begin) * (xs.end - xs.begin);
      if (pixels == 0) continue;  // more lattice cells than pixels: empty cell
      std::int64_t fg = 0;
      for (int y = ys.begin; y < ys.end; ++y) {
        const std::uint8_t* row = bits.data() + std::size_t(y) * w;
        for (int x = xs.begin; x < xs.end; ++x) fg += row[x];
      }
      const auto j = std::size_t(r) * grid_cols + c;
      tok.coverage[j] = static_cast<double>(fg) / static_cast<double>(pixels);
      tok.selected[j] = 2 * fg > pixels ? 1 : 0;
    }
  }
  return tok;
}

TokenSelection selected_tokens(const TokenMask& tok) {
  TokenSelection sel;
  for (std::size_t j = 0; j < tok.selected.size(); ++j) {
    if (tok.selected[j]) sel.indices.push_back(static_cast<int>(j));
  }
  return sel;
}

TokenSelection spatial_uniform_sample(const TokenMask& tok, int cap) {
  if (cap < 1) throw Error(ErrorCode::invalid_argument, "token cap must be >= 1");
  TokenSelection all = selected_tokens(tok);
  if (all.indices.size() <= static_cast<std::size_t>(cap)) return all;

  const int cols = tok.layout.grid_cols();
  std::int64_t g = 1;
  while (g * g < cap) ++g;

  int r0 = std::numeric_limits<int>::max(), r1 = -1;
  int c0 = std::numeric_limits<int>::max(), c1 = -1;
  for (int j : all.indices) {
    const int r = j / cols, c = j % cols;
    r0 = std::min(r0, r);
    r1 = std::max(r1, r);
    c0 = std::min(c0, c);
    c1 = std::max(c1, c);
  }
  const std::int64_t box_h = r1 - r0 + 1;
  const std::int64_t box_w = c1 - c0 + 1;

  // Coordinates are scaled by 2g so token centres (r + 1/2) and overlay cell
  // centres (r0 + (k + 1/2) * box/g) are both integers.
  struct Pick {
    std::int64_t dist2 = std::numeric_limits<std::int64_t>::max();
    int index = -1;
  };
  std::vector<Pick> cells(std::size_t(g * g));
  for (int j : all.indices) {
    const std::int64_t r = j / cols, c = j % cols;
    const std::int64_t gr = ((2 * (r - r0) + 1) * g) / (2 * box_h);
    const std::int64_t gc = ((2 * (c - c0) + 1) * g) / (2 * box_w);
    const std::int64_t dy = g * (2 * r + 1) - (2 * g * r0 + (2 * gr + 1) * box_h);
    const std::int64_t dx = g * (2 * c + 1) - (2 * g * c0 + (2 * gc + 1) * box_w);
    const std::int64_t d2 = dy * dy + dx * dx;
    Pick& p = cells[std::size_t(gr * g + gc)];
    if (d2 < p.dist2 || (d2 == p.dist2 && j < p.index)) p = {d2, j};
  }

  TokenSelection out;
  for (const Pick& p : cells) {
    if (p.index < 0) continue;
    if (out.indices.size() == static_cast<std::size_t>(cap)) break;
    out.indices.push_back(p.index);
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

FeatureSequence extract_features(const TokenFeatures& features, const TokenSelection& sel) {
  FeatureSequence seq(static_cast<int>(sel.size()), features.cols);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const int j = sel.indices[i];
    if (j < 0 || j >= features.rows) {
      throw Error(ErrorCode::out_of_range, "token index " + std::to_string(j) + " outside " +
                                               std::to_string(features.rows) + " feature rows");
    }
    const auto src = features.row(j);
    std::copy(src.begin(), src.end(), seq.row(static_cast<int>(i)).begin());
  }
  return seq;
}

void to_json(nlohmann::json& j, const TokenSelection& sel) { j = sel.indices; }
void from_json(const nlohmann::json& j, TokenSelection& sel) { sel.indices = j.get<std::vector<int>>(); }

}  // namespace pixground
