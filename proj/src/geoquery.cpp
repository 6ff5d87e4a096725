#include "pixground/geoquery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pixground/error.hpp"

namespace pixground {

std::map<int, std::int64_t> SemanticRaster::class_counts() const {
  std::map<int, std::int64_t> counts;
  for (auto l : labels) {
    if (l != 0) ++counts[l];
  }
  return counts;
}

std::int64_t SemanticRaster::valid_pixel_count() const {
  return static_cast<std::int64_t>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
}

void SemanticRaster::validate() const {
  if (width < 1 || height < 1) throw Error(ErrorCode::schema, "raster dimensions must be positive");
  if (labels.size() != std::size_t(width) * std::size_t(height)) {
    throw Error(ErrorCode::schema, "raster has " + std::to_string(labels.size()) + " labels for " +
                                       std::to_string(width) + "x" + std::to_string(height));
  }
  if (!(resolution > 0.0)) throw Error(ErrorCode::schema, "raster resolution must be positive");
  for (const auto& [id, n] : class_counts()) {
    if (id < 0) throw Error(ErrorCode::schema, "negative class id " + std::to_string(id));
    if (!class_names.contains(id)) throw Error(ErrorCode::schema, "class id " + std::to_string(id) + " has no name");
  }
}

std::string_view answer_kind_name(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::area: return "area";
    case AnswerKind::coverage: return "coverage";
    case AnswerKind::ranking: return "ranking";
    case AnswerKind::distance: return "distance";
    case AnswerKind::adjacency: return "adjacency";
    case AnswerKind::building_change: return "building_change";
    case AnswerKind::existence: return "existence";
    case AnswerKind::counting: return "counting";
    case AnswerKind::localization: return "localization";
  }
  return "area";
}

AnswerKind parse_answer_kind(std::string_view name) {
  for (auto k : {AnswerKind::area, AnswerKind::coverage, AnswerKind::ranking, AnswerKind::distance,
                 AnswerKind::adjacency, AnswerKind::building_change, AnswerKind::existence,
                 AnswerKind::counting, AnswerKind::localization}) {
    if (answer_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::schema, "unknown answer kind '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const SpatialAnswer& a) {
  j = nlohmann::json{{"kind", answer_kind_name(a.kind)}, {"units", a.units}, {"valid", a.valid}};
  std::visit([&](const auto& v) { j["value"] = v; }, a.value);
  if (a.reject_reason) j["reject_reason"] = *a.reject_reason;
}

void from_json(const nlohmann::json& j, SpatialAnswer& a) {
  a.kind = parse_answer_kind(j.at("kind").get<std::string>());
  a.units = j.value("units", std::string{});
  a.valid = j.value("valid", true);
  const auto& v = j.at("value");
  if (v.is_boolean()) {
    a.value = v.get<bool>();
  } else if (v.is_number()) {
    a.value = v.get<double>();
  } else if (v.is_array()) {
    a.value = v.get<std::vector<int>>();
  } else if (v.is_string()) {
    a.value = v.get<std::string>();
  } else {
    throw Error(ErrorCode::schema, "unsupported answer value");
  }
  if (j.contains("reject_reason") && !j.at("reject_reason").is_null()) {
    a.reject_reason = j.at("reject_reason").get<std::string>();
  } else {
    a.reject_reason.reset();
  }
}

namespace {

SpatialAnswer invalid(SpatialAnswer a, std::string_view reason) {
  a.valid = false;
  a.reject_reason = std::string(reason);
  return a;
}

void require_known(const SemanticRaster& raster, int class_id) {
  if (class_id == 0 || !raster.class_names.contains(class_id)) {
    throw Error(ErrorCode::unknown_class, "unknown class id " + std::to_string(class_id));
  }
}

std::int64_t count_of(const SemanticRaster& raster, int class_id) {
  return static_cast<std::int64_t>(std::count(raster.labels.begin(), raster.labels.end(), class_id));
}

// P_c >= 5%, evaluated on integers.
bool significant(std::int64_t n, std::int64_t total) { return 100 * n >= 5 * total; }

void require_distinct_present(const SemanticRaster& raster, int ci, int cj) {
  require_known(raster, ci);
  require_known(raster, cj);
  if (ci == cj) throw Error(ErrorCode::invalid_argument, "the two classes must differ");
  for (int c : {ci, cj}) {
    if (count_of(raster, c) == 0) {
      throw Error(ErrorCode::absent_class, "class '" + raster.class_names.at(c) + "' is absent");
    }
  }
}

std::int64_t require_valid_pixels(const SemanticRaster& raster) {
  const auto total = raster.valid_pixel_count();
  if (total == 0) throw Error(ErrorCode::empty_input, "raster has no valid (nonzero) pixels");
  return total;
}

}  // namespace

BinaryMask class_mask(const SemanticRaster& raster, int class_id) {
  require_known(raster, class_id);
  std::vector<std::uint8_t> bits(raster.labels.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = raster.labels[i] == class_id ? 1 : 0;
  return BinaryMask(raster.width, raster.height, std::move(bits));
}

SpatialAnswer area(const SemanticRaster& raster, int class_id) {
  require_known(raster, class_id);
  const auto n = count_of(raster, class_id);
  SpatialAnswer a{AnswerKind::area, static_cast<double>(n) * raster.resolution * raster.resolution, "m^2", true, std::nullopt};
  return n == 0 ? invalid(a, reject::zero_area) : a;
}

SpatialAnswer coverage_percentage(const SemanticRaster& raster, int class_id) {
  require_known(raster, class_id);
  const auto total = require_valid_pixels(raster);
  const auto n = count_of(raster, class_id);
  SpatialAnswer a{AnswerKind::coverage, 100.0 * static_cast<double>(n) / static_cast<double>(total), "%", true, std::nullopt};
  return significant(n, total) ? a : invalid(a, reject::below_significance);
}

std::map<int, double> coverage_table(const SemanticRaster& raster) {
  const auto total = require_valid_pixels(raster);
  std::map<int, double> out;
  for (const auto& [id, n] : raster.class_counts()) out[id] = 100.0 * static_cast<double>(n) / static_cast<double>(total);
  return out;
}

SpatialAnswer rank_areas(const SemanticRaster& raster) {
  const auto total = require_valid_pixels(raster);
  std::vector<std::pair<int, std::int64_t>> eligible;
  for (const auto& [id, n] : raster.class_counts()) {
    if (significant(n, total)) eligible.emplace_back(id, n);
  }
  if (eligible.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "ranking needs at least two classes with >= 5% coverage");
  }
  std::stable_sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<int> order;
  for (const auto& e : eligible) order.push_back(e.first);
  return {AnswerKind::ranking, std::move(order), "", true, std::nullopt};
}

SpatialAnswer compare_pair(const SemanticRaster& raster, int class_i, int class_j) {
  require_known(raster, class_i);
  require_known(raster, class_j);
  if (class_i == class_j) throw Error(ErrorCode::invalid_argument, "the two classes must differ");
  const auto total = require_valid_pixels(raster);
  const auto ni = count_of(raster, class_i);
  const auto nj = count_of(raster, class_j);
  SpatialAnswer a{AnswerKind::ranking, ni > nj, "", true, std::nullopt};
  if (!significant(ni, total) || !significant(nj, total)) return invalid(a, reject::below_significance);
  // |A_i - A_j| > 0.1 max(A_i, A_j); the common r^2 factor cancels.
  if (10 * std::llabs(ni - nj) <= std::max(ni, nj)) return invalid(a, reject::ambiguous_sizes);
  return a;
}

double min_distance_pixels(const BinaryMask& from, const BinaryMask& to) {
  if (!from.same_shape(to)) throw Error(ErrorCode::dimension_mismatch, "mask dimensions differ");
  const auto d2 = squared_distance_transform(from);
  double best = std::numeric_limits<double>::infinity();
  const auto bits = to.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) best = std::min(best, d2[i]);
  }
  return std::sqrt(best);
}

SpatialAnswer min_distance(const SemanticRaster& raster, int class_i, int class_j) {
  require_distinct_present(raster, class_i, class_j);
  const BinaryMask mi = open(class_mask(raster, class_i));
  const BinaryMask mj = open(class_mask(raster, class_j));
  SpatialAnswer a{AnswerKind::distance, 0.0, "m", true, std::nullopt};
  if (mi.none() || mj.none()) return invalid(a, reject::empty_after_opening);
  const double d = min_distance_pixels(mi, mj);
  a.value = d * raster.resolution;
  return d > 10.0 ? a : invalid(a, reject::trivially_adjacent);
}

SpatialAnswer adjacency(const SemanticRaster& raster, int class_i, int class_j) {
  require_distinct_present(raster, class_i, class_j);
  const auto total = require_valid_pixels(raster);
  const BinaryMask mi = class_mask(raster, class_i);
  const BinaryMask mj = class_mask(raster, class_j);
  SpatialAnswer a{AnswerKind::adjacency, intersection_count(dilate(mi), mj) > 0, "", true, std::nullopt};
  for (const BinaryMask* m : {&mi, &mj}) {
    if (100 * static_cast<std::int64_t>(m->count()) < 3 * total) return invalid(a, reject::too_small);
  }
  for (const BinaryMask* m : {&mi, &mj}) {
    if (connected_components(*m, Connectivity::eight).count > 5) return invalid(a, reject::fragmented);
  }
  return a;
}

SpatialAnswer existence(const SemanticRaster& raster, int class_id) {
  require_known(raster, class_id);
  return {AnswerKind::existence, count_of(raster, class_id) > 0, "", true, std::nullopt};
}

SpatialAnswer count_regions(const SemanticRaster& raster, int class_id) {
  const auto labeling = connected_components(class_mask(raster, class_id), Connectivity::eight);
  SpatialAnswer a{AnswerKind::counting, static_cast<double>(labeling.count), "regions", true, std::nullopt};
  return labeling.count == 0 ? invalid(a, reject::zero_area) : a;
}

const std::array<std::string_view, 9> kCompassPositions = {
    "in the northwestern part", "in the northern part", "in the northeastern part",
    "in the western part",      "in the center",        "in the eastern part",
    "in the southwestern part", "in the southern part", "in the southeastern part"};

SpatialAnswer localize(const SemanticRaster& raster, int class_id) {
  const BinaryMask m = class_mask(raster, class_id);
  double sx = 0.0, sy = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      sx += x + 0.5;
      sy += y + 0.5;
      ++n;
    }
  }
  if (n == 0) return invalid({AnswerKind::localization, std::string{}, "", true, std::nullopt}, reject::zero_area);
  const int col = std::min(2, static_cast<int>(3.0 * (sx / n) / m.width()));
  const int row = std::min(2, static_cast<int>(3.0 * (sy / n) / m.height()));
  return {AnswerKind::localization, std::string(kCompassPositions[std::size_t(row * 3 + col)]), "", true, std::nullopt};
}

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  return (d1 == 0 && on_segment(a, c, d)) || (d2 == 0 && on_segment(b, c, d)) ||
         (d3 == 0 && on_segment(c, a, b)) || (d4 == 0 && on_segment(d, a, b));
}

double signed_area(const Polygon& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return s / 2.0;
}

void fill_span(BinaryMask& mask, int py, double x0, double x1) {
  const int lo = std::max(0, static_cast<int>(std::ceil(x0)));
  const int hi = std::min(mask.width() - 1, static_cast<int>(std::floor(x1)));
  for (int px = lo; px <= hi; ++px) mask.set(px, py);
}

}  // namespace

bool is_simple(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % n];
      const Point& c = poly[j];
      const Point& d = poly[(j + 1) % n];
      if (adjacent) {
        // Neighbouring edges may only share their common vertex.
        if (cross(a, b, c) == 0 && cross(a, b, d) == 0) {
          const Point& shared = j == i + 1 ? b : a;
          const Point& far_self = j == i + 1 ? a : b;
          const Point& far_other = j == i + 1 ? d : c;
          const bool folds_back = (far_self.x - shared.x) * (far_other.x - shared.x) +
                                      (far_self.y - shared.y) * (far_other.y - shared.y) > 0;
          if (folds_back) return false;
        }
        continue;
      }
      if (segments_touch(a, b, c, d)) return false;
    }
  }
  return true;
}

BinaryMask rasterize_polygon(const Polygon& poly, int width, int height) {
  if (poly.size() < 3) {
    throw Error(ErrorCode::degenerate_polygon, "polygon needs at least 3 vertices, got " + std::to_string(poly.size()));
  }
  BinaryMask mask(width, height);
  const std::size_t n = poly.size();
  std::vector<double> xs;
  for (int py = 0; py < height; ++py) {
    const double y = py;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % n];
      // Half-open in y so shared vertices are counted once.
      if ((a.y <= y && b.y > y) || (b.y <= y && a.y > y)) {
        xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) fill_span(mask, py, xs[k], xs[k + 1]);

    // Centres lying exactly on an edge belong to the polygon.
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % n];
      if (y < std::min(a.y, b.y) || y > std::max(a.y, b.y)) continue;
      if (a.y == b.y) {
        fill_span(mask, py, std::min(a.x, b.x), std::max(a.x, b.x));
        continue;
      }
      const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      const double rx = std::round(x);
      if (std::abs(x - rx) < 1e-9 && rx >= 0 && rx < width) mask.set(static_cast<int>(rx), py);
    }
  }
  return mask;
}

void BuildingSet::validate() const {
  if (width < 1 || height < 1) throw Error(ErrorCode::schema, "building set needs positive width and height");
  if (labels.size() != polygons.size()) throw Error(ErrorCode::schema, "one damage label per building required");
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const auto& p = polygons[i];
    // All-collinear footprints are degenerate; a bowtie also has zero signed
    // area but is reported as crossing.
    bool collinear = p.size() < 3;
    if (!collinear) {
      const auto dir = std::find_if(p.begin(), p.end(), [&](const Point& q) { return q.x != p[0].x || q.y != p[0].y; });
      collinear = dir == p.end() || std::all_of(p.begin(), p.end(), [&](const Point& q) {
                    return (dir->x - p[0].x) * (q.y - p[0].y) - (dir->y - p[0].y) * (q.x - p[0].x) == 0.0;
                  });
    }
    if (collinear) {
      throw Error(ErrorCode::degenerate_polygon, "building " + std::to_string(i) + " is degenerate");
    }
    if (!is_simple(p) || signed_area(p) == 0.0) {
      throw Error(ErrorCode::self_intersecting, "building " + std::to_string(i) + " self-intersects");
    }
  }
}

BuildingChange building_change(const BuildingSet& buildings) {
  buildings.validate();
  if (buildings.polygons.empty()) throw Error(ErrorCode::empty_input, "building set is empty");
  BuildingChange out;
  out.total = static_cast<int>(buildings.polygons.size());
  out.destroyed_mask = BinaryMask(buildings.width, buildings.height);
  auto bits = out.destroyed_mask.bits();
  for (std::size_t i = 0; i < buildings.polygons.size(); ++i) {
    if (buildings.labels[i] != DamageLabel::destroyed) continue;
    ++out.destroyed;
    const auto footprint = rasterize_polygon(buildings.polygons[i], buildings.width, buildings.height);
    const auto fp = footprint.bits();
    for (std::size_t k = 0; k < bits.size(); ++k) bits[k] |= fp[k];
  }
  out.rate = {AnswerKind::building_change, 100.0 * out.destroyed / out.total, "%", true, std::nullopt};
  if (out.total < 10) {
    out.rate = invalid(out.rate, reject::too_few_buildings);
  } else if (out.destroyed < 3) {
    out.rate = invalid(out.rate, reject::too_few_destroyed);
  }
  return out;
}

}  // namespace pixground
