#include "pixground/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pixground/error.hpp"

namespace pixground {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::malformed_mask: return "malformed_mask";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::empty_source: return "empty_source";
    case ErrorCode::unknown_class: return "unknown_class";
    case ErrorCode::absent_class: return "absent_class";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::degenerate_polygon: return "degenerate_polygon";
    case ErrorCode::self_intersecting: return "self_intersecting";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::undefined_correlation: return "undefined_correlation";
    case ErrorCode::schema: return "schema";
    case ErrorCode::io: return "io";
    case ErrorCode::decoder: return "decoder";
  }
  return "unknown";
}

BinaryMask::BinaryMask(int width, int height)
    : BinaryMask(width, height,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                           static_cast<std::size_t>(std::max(height, 0)))) {}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::invalid_argument,
                "mask dimensions must be positive, got " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::malformed_mask, "mask plane size does not match dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void to_json(nlohmann::json& j, const RleMask& rle) {
  j = nlohmann::json{{"width", rle.width}, {"height", rle.height}, {"counts", rle.counts}};
}

void from_json(const nlohmann::json& j, RleMask& rle) {
  if (!j.is_object() || !j.contains("width") || !j.contains("height") || !j.contains("counts")) {
    throw Error(ErrorCode::schema, "RLE mask needs width, height and counts");
  }
  rle.width = j.at("width").get<int>();
  rle.height = j.at("height").get<int>();
  rle.counts = j.at("counts").get<std::vector<std::int64_t>>();
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (auto b : mask.bits()) {
    if (b != current) {
      rle.counts.push_back(run);
      current = b;
      run = 0;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  if (rle.width < 1 || rle.height < 1) {
    throw Error(ErrorCode::malformed_mask, "RLE dimensions must be positive");
  }
  const auto total = static_cast<std::int64_t>(rle.width) * rle.height;
  std::int64_t sum = 0;
  for (auto c : rle.counts) {
    if (c < 0) throw Error(ErrorCode::malformed_mask, "negative RLE run");
    sum += c;
  }
  if (sum != total) {
    throw Error(ErrorCode::malformed_mask, "RLE counts sum to " + std::to_string(sum) +
                                               ", expected " + std::to_string(total));
  }
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(total));
  std::uint8_t value = 0;
  for (auto c : rle.counts) {
    bits.insert(bits.end(), static_cast<std::size_t>(c), value);
    value ^= 1;
  }
  return BinaryMask(rle.width, rle.height, std::move(bits));
}

std::size_t rle_area(const RleMask& rle) {
  std::size_t area = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) area += static_cast<std::size_t>(rle.counts[i]);
  return area;
}

ComponentLabeling connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabeling out{w, h, connectivity, 0, std::vector<int>(mask.size(), 0)};
  const bool diag = connectivity == Connectivity::eight;
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto start = static_cast<std::size_t>(y) * w + x;
      if (!mask.bits()[start] || out.labels[start] != 0) continue;
      const int label = ++out.count;
      out.labels[start] = label;
      stack.assign(1, static_cast<int>(start));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int px = p % w;
        const int py = p / w;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || (!diag && dx != 0 && dy != 0)) continue;
            const int nx = px + dx;
            const int ny = py + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto q = static_cast<std::size_t>(ny) * w + nx;
            if (mask.bits()[q] && out.labels[q] == 0) {
              out.labels[q] = label;
              stack.push_back(static_cast<int>(q));
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

// Separable 3x3 min/max: a horizontal pass then a vertical pass, each clipped
// at the border. `keep_any` selects dilation (max) vs erosion (min).
BinaryMask morph3x3(const BinaryMask& mask, bool keep_any) {
  const int w = mask.width();
  const int h = mask.height();
  const auto src = mask.bits();
  std::vector<std::uint8_t> horiz(mask.size());
  std::vector<std::uint8_t> out(mask.size());

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(x - 1, 0);
      const int x1 = std::min(x + 1, w - 1);
      std::uint8_t v = src[row + x0];
      for (int k = x0 + 1; k <= x1; ++k) v = keep_any ? (v | src[row + k]) : (v & src[row + k]);
      horiz[row + x] = v;
    }
  }

#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(y - 1, 0);
    const int y1 = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = horiz[static_cast<std::size_t>(y0) * w + x];
      for (int k = y0 + 1; k <= y1; ++k) {
        const auto b = horiz[static_cast<std::size_t>(k) * w + x];
        v = keep_any ? (v | b) : (v & b);
      }
      out[static_cast<std::size_t>(y) * w + x] = v;
    }
  }
  return BinaryMask(w, h, std::move(out));
}

constexpr double kUnreached = std::numeric_limits<double>::infinity();

// One-dimensional squared distance transform over `n` samples of `f` with
// stride. Only finite samples contribute parabolas, so every arithmetic step
// stays in exact small integers.
void edt_1d(const double* f, std::size_t stride, int n, double* out, std::size_t out_stride,
            std::vector<int>& sites, std::vector<double>& bounds) {
  sites.resize(n);
  bounds.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    const double fq = f[q * stride];
    if (fq == kUnreached) continue;
    if (k < 0) {
      k = 0;
      sites[0] = q;
      bounds[0] = -kUnreached;
      bounds[1] = kUnreached;
      continue;
    }
    // bounds[0] is -inf, so the scan always stops at k >= 0.
    double s = 0.0;
    while (true) {
      const int v = sites[k];
      const double fv = f[v * stride];
      s = ((fq + double(q) * q) - (fv + double(v) * v)) / (2.0 * q - 2.0 * v);
      if (s > bounds[k]) break;
      --k;
    }
    ++k;
    sites[k] = q;
    bounds[k] = s;
    bounds[k + 1] = kUnreached;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[q * out_stride] = kUnreached;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (bounds[j + 1] < q) ++j;
    const double dq = double(q) - sites[j];
    out[q * out_stride] = dq * dq + f[sites[j] * stride];
  }
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask) { return morph3x3(mask, true); }
BinaryMask erode(const BinaryMask& mask) { return morph3x3(mask, false); }
BinaryMask open(const BinaryMask& mask) { return dilate(erode(mask)); }

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
  if (mask.none()) {
    throw Error(ErrorCode::empty_source, "distance transform of an empty mask");
  }
  const int w = mask.width();
  const int h = mask.height();
  std::vector<double> source(mask.size());
  for (std::size_t i = 0; i < source.size(); ++i) source[i] = mask.bits()[i] ? 0.0 : kUnreached;

  std::vector<double> cols(mask.size());
#pragma omp parallel
  {
    std::vector<int> sites;
    std::vector<double> bounds;
#pragma omp for schedule(static)
    for (int x = 0; x < w; ++x) {
      edt_1d(source.data() + x, w, h, cols.data() + x, w, sites, bounds);
    }
  }

  std::vector<double> result(mask.size());
#pragma omp parallel
  {
    std::vector<int> sites;
    std::vector<double> bounds;
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * w;
      edt_1d(cols.data() + row, 1, w, result.data() + row, 1, sites, bounds);
    }
  }
  return result;
}

DistanceField distance_transform(const BinaryMask& mask) {
  DistanceField field{mask.width(), mask.height(), squared_distance_transform(mask)};
  for (auto& v : field.values) v = std::sqrt(v);
  return field;
}

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::dimension_mismatch, "mask dimensions differ");
  std::size_t n = 0;
  const auto pa = a.bits();
  const auto pb = b.bits();
  for (std::size_t i = 0; i < pa.size(); ++i) n += pa[i] & pb[i];
  return n;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  const auto inter = intersection_count(a, b);
  const auto uni = a.count() + b.count() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace pixground
