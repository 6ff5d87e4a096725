#pragma once

// Patch/token accounting and the pixel-mask -> token-selection pipeline.
//
// Tile tokens are laid out on a (rows*s) x (cols*s) lattice and indexed
// row-major; the thumbnail's s*s tokens, when present, follow the tile tokens
// and never take part in grounding.

#include <cstdint>
#include <span>
#include <vector>

#include "pixground/raster.hpp"

namespace pixground {

struct PatchLayout {
  int rows = 1;              // tiles along the image height
  int cols = 1;              // tiles along the image width
  int tokens_per_side = 16;  // s
  bool has_thumbnail = false;
  int image_width = 1;
  int image_height = 1;

  int grid_rows() const noexcept { return rows * tokens_per_side; }
  int grid_cols() const noexcept { return cols * tokens_per_side; }
  int tile_token_count() const noexcept { return grid_rows() * grid_cols(); }
  int token_count() const noexcept {
    return tile_token_count() + (has_thumbnail ? tokens_per_side * tokens_per_side : 0);
  }

  friend bool operator==(const PatchLayout&, const PatchLayout&) = default;
};

/// Throws Error{invalid_argument} if any count is non-positive.
void validate(const PatchLayout& layout);

inline constexpr int kDefaultTileSize = 448;
inline constexpr int kDefaultMaxTiles = 12;
inline constexpr int kDefaultTokensPerSide = 16;
inline constexpr int kDefaultTokenCap = 128;

/// Dynamic tiling: ceil(h/tile) x ceil(w/tile) tiles, or the best aspect-ratio
/// fit with at most `max_tiles` tiles when that grid is too large. A global
/// thumbnail is added whenever more than one tile is used.
PatchLayout plan_patches(int image_width, int image_height, int tile_size = kDefaultTileSize,
                         int max_tiles = kDefaultMaxTiles,
                         int tokens_per_side = kDefaultTokensPerSide);

/// Half-open pixel span [begin, end) of lattice cell `k` when `extent` pixels
/// are split into `cells` cells with floor-rational boundaries.
struct CellSpan {
  int begin = 0;
  int end = 0;
};
CellSpan cell_span(int k, int extent, int cells) noexcept;

struct TokenMask {
  PatchLayout layout;
  std::vector<double> coverage;        // per tile token, in [0, 1]
  std::vector<std::uint8_t> selected;  // coverage > 0.5

  std::size_t selected_count() const noexcept;
};

struct TokenSelection {
  std::vector<int> indices;  // strictly increasing tile-token indices

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  friend bool operator==(const TokenSelection&, const TokenSelection&) = default;
};

/// Dense row-major matrix of doubles. Used for per-token visual features,
/// extracted feature sequences and text embeddings.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(int rows_, int cols_) : rows(rows_), cols(cols_), data(std::size_t(rows_) * cols_) {}

  std::span<const double> row(int i) const noexcept {
    return {data.data() + std::size_t(i) * cols, std::size_t(cols)};
  }
  std::span<double> row(int i) noexcept { return {data.data() + std::size_t(i) * cols, std::size_t(cols)}; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

using TokenFeatures = FeatureMatrix;    // N visual tokens x D
using FeatureSequence = FeatureMatrix;  // one row per selected token, selection order
using TextEmbeddings = FeatureMatrix;   // L text tokens x D

/// Exact per-cell foreground fraction and the strict >50% rule.
TokenMask downsample_mask(const BinaryMask& mask, const PatchLayout& layout);

/// All selected tokens in row-major order.
TokenSelection selected_tokens(const TokenMask& tok);

/// Caps the selection at `cap` tokens. Below the cap this is the identity;
/// above it, a ceil(sqrt(cap))^2 overlay on the bounding box of the selected
/// tokens contributes the token nearest each nonempty cell centre, and any
/// surplus beyond `cap` is dropped in row-major cell order.
TokenSelection spatial_uniform_sample(const TokenMask& tok, int cap = kDefaultTokenCap);

/// Gathers feature rows in selection order. Throws Error{out_of_range}.
FeatureSequence extract_features(const TokenFeatures& features, const TokenSelection& sel);

void to_json(nlohmann::json& j, const TokenSelection& sel);
void from_json(const nlohmann::json& j, TokenSelection& sel);

}  // namespace pixground
