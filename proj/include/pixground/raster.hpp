#pragma once

// Dense binary-mask primitives: run-length codec, connected components,
// 3x3 morphology and the exact Euclidean distance transform.
//
// Every function here is pure. The morphology and distance kernels are
// OpenMP-parallel; straightforward serial counterparts live in serial.hpp.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace pixground {

class BinaryMask {
 public:
  BinaryMask() = default;
  /// All-background mask. Throws on non-positive dimensions.
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool on = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
  }

  /// Row-major plane, one byte per pixel holding 0 or 1.
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  std::size_t count() const noexcept;
  bool none() const noexcept { return count() == 0; }
  bool same_shape(const BinaryMask& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Alternating background/foreground run lengths in row-major order, always
/// starting with a background run (zero when the first pixel is foreground).
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

void to_json(nlohmann::json& j, const RleMask& rle);
void from_json(const nlohmann::json& j, RleMask& rle);

enum class Connectivity { four = 4, eight = 8 };

struct ComponentLabeling {
  int width = 0;
  int height = 0;
  Connectivity connectivity = Connectivity::eight;
  int count = 0;
  /// 0 for background, 1..count otherwise, numbered in raster-scan order of
  /// each component's first pixel.
  std::vector<int> labels;
};

struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

RleMask rle_encode(const BinaryMask& mask);
/// Throws Error{malformed_mask} when the counts do not cover the plane exactly.
BinaryMask rle_decode(const RleMask& rle);
std::size_t rle_area(const RleMask& rle);

ComponentLabeling connected_components(const BinaryMask& mask, Connectivity connectivity);

/// 3x3 square structuring element, neighbourhoods clipped at the border.
BinaryMask dilate(const BinaryMask& mask);
BinaryMask erode(const BinaryMask& mask);
/// Erosion followed by dilation.
BinaryMask open(const BinaryMask& mask);

/// Exact Euclidean distance from every pixel to the nearest foreground pixel
/// (separable lower-envelope algorithm). Throws Error{empty_source} when the
/// mask has no foreground.
DistanceField distance_transform(const BinaryMask& mask);

/// Squared-distance form of the transform; values are exact integers.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b);
/// Intersection over union. Two empty masks are identical and score 1.
double iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace pixground
