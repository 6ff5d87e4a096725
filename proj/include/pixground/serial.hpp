#pragma once

// Single-threaded reference versions of the parallel kernels. They favour the
// most literal formulation over speed and are kept for testing and for the
// serial-vs-parallel benchmark.

#include "pixground/grid.hpp"
#include "pixground/modality.hpp"
#include "pixground/raster.hpp"

namespace pixground::serial {

/// Direct 3x3 neighbourhood scan per pixel.
BinaryMask dilate(const BinaryMask& mask);
BinaryMask erode(const BinaryMask& mask);
BinaryMask open(const BinaryMask& mask);

/// Two-pass lower-envelope transform without threading.
DistanceField distance_transform(const BinaryMask& mask);

/// Counts foreground pixels cell by cell.
TokenMask downsample_mask(const BinaryMask& mask, const PatchLayout& layout);

/// Materialises the full N x L logit matrix and normalises column by column.
RelevanceField relevance_scores(const TokenFeatures& visual, const TextEmbeddings& text,
                                Modality modality);

}  // namespace pixground::serial
