#pragma once

// Deterministic answers from semantic rasters: area, coverage, area ranking,
// minimum inter-class distance, adjacency and building damage rate, each with
// its validity filter.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pixground/raster.hpp"

namespace pixground {

struct SemanticRaster {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;  // row-major; 0 is void/background
  double resolution = 10.0;          // metres per pixel
  std::map<int, std::string> class_names;

  int at(int x, int y) const noexcept { return labels[std::size_t(y) * width + x]; }
  /// Pixel count per nonzero class id (only classes that occur).
  std::map<int, std::int64_t> class_counts() const;
  std::int64_t valid_pixel_count() const;
  /// Throws Error{schema} when a nonzero label has no name, the resolution is
  /// not positive, or the label plane has the wrong size.
  void validate() const;
};

enum class AnswerKind {
  area,
  coverage,
  ranking,
  distance,
  adjacency,
  building_change,
  existence,
  counting,
  localization,
};

std::string_view answer_kind_name(AnswerKind kind);
AnswerKind parse_answer_kind(std::string_view name);

// Machine-readable reasons attached to invalid answers.
namespace reject {
inline constexpr std::string_view zero_area = "zero area";
inline constexpr std::string_view below_significance = "below 5% significance";
inline constexpr std::string_view ambiguous_sizes = "ambiguous sizes";
inline constexpr std::string_view trivially_adjacent = "trivially adjacent (<=10 px)";
inline constexpr std::string_view empty_after_opening = "empty after opening";
inline constexpr std::string_view too_small = "region too small (<3%)";
inline constexpr std::string_view fragmented = "fragmented (>5 components)";
inline constexpr std::string_view too_few_buildings = "too few buildings";
inline constexpr std::string_view too_few_destroyed = "too few destroyed buildings";
}  // namespace reject

/// number (area, coverage, distance, rate, count), boolean (comparison,
/// adjacency, existence), class ordering (ranking) or text (localization).
using AnswerValue = std::variant<double, bool, std::vector<int>, std::string>;

struct SpatialAnswer {
  AnswerKind kind = AnswerKind::area;
  AnswerValue value = 0.0;
  std::string units;
  bool valid = true;
  std::optional<std::string> reject_reason;

  double number() const { return std::get<double>(value); }
  bool flag() const { return std::get<bool>(value); }
};

void to_json(nlohmann::json& j, const SpatialAnswer& a);
void from_json(const nlohmann::json& j, SpatialAnswer& a);

BinaryMask class_mask(const SemanticRaster& raster, int class_id);

SpatialAnswer area(const SemanticRaster& raster, int class_id);
SpatialAnswer coverage_percentage(const SemanticRaster& raster, int class_id);
/// Raw percentage of every class present, over valid pixels.
std::map<int, double> coverage_table(const SemanticRaster& raster);

/// Descending by area over classes with coverage >= 5%; ties by ascending id.
SpatialAnswer rank_areas(const SemanticRaster& raster);
/// "Is c_i larger than c_j?"; valid only when the areas differ by more than
/// 10% of the larger one and both classes reach 5% coverage.
SpatialAnswer compare_pair(const SemanticRaster& raster, int class_i, int class_j);

/// Minimum Euclidean distance in metres between the opened masks of the two
/// classes; invalid at 10 px or less.
SpatialAnswer min_distance(const SemanticRaster& raster, int class_i, int class_j);
/// Same computation, in pixels, without the validity gate.
double min_distance_pixels(const BinaryMask& from, const BinaryMask& to);

/// dilate(M_i) intersects M_j. Invalid when either class covers < 3% or has
/// more than 5 8-connected components.
SpatialAnswer adjacency(const SemanticRaster& raster, int class_i, int class_j);

SpatialAnswer existence(const SemanticRaster& raster, int class_id);
/// Number of 8-connected components of the class.
SpatialAnswer count_regions(const SemanticRaster& raster, int class_id);
/// Coarse position of the class centroid on a 3x3 compass grid.
SpatialAnswer localize(const SemanticRaster& raster, int class_id);
extern const std::array<std::string_view, 9> kCompassPositions;

struct Point {
  double x = 0.0;
  double y = 0.0;
};
using Polygon = std::vector<Point>;

/// Pixel centres sit at integer coordinates. A pixel is filled when its centre
/// lies inside the polygon under the even-odd rule or on its boundary;
/// anything outside the image is clipped. Throws Error{degenerate_polygon}
/// for fewer than three vertices.
BinaryMask rasterize_polygon(const Polygon& poly, int width, int height);
bool is_simple(const Polygon& poly);

enum class DamageLabel { destroyed, other };

struct BuildingSet {
  int width = 0;
  int height = 0;
  std::vector<Polygon> polygons;
  std::vector<DamageLabel> labels;

  /// Throws for degenerate or self-intersecting footprints.
  void validate() const;
};

struct BuildingChange {
  SpatialAnswer rate;  // percentage of destroyed buildings
  int destroyed = 0;
  int total = 0;
  BinaryMask destroyed_mask;
};

BuildingChange building_change(const BuildingSet& buildings);

// I/O for the raster and footprint file formats.

/// JSON grid: {"width","height","resolution","labels":[...],"class_names":{"1":"forest"}}.
SemanticRaster raster_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SemanticRaster& raster);

/// Binary (P5) or ASCII (P2) PGM; gray values are class ids. Metadata is read
/// from a sibling "<stem>.meta.json" when present, otherwise classes are named
/// "class_<id>" at 10 m resolution.
SemanticRaster load_pgm_raster(const std::filesystem::path& path);
void save_pgm_raster(const SemanticRaster& raster, const std::filesystem::path& path);

/// Dispatches on extension: .pgm, or JSON grid otherwise.
SemanticRaster load_raster(const std::filesystem::path& path);

/// {"width","height","buildings":[{"polygon":[[x,y],...],"label":"destroyed"}, ...]}
BuildingSet buildings_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BuildingSet& buildings);
BuildingSet load_buildings(const std::filesystem::path& path);

}  // namespace pixground
