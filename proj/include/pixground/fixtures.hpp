#pragma once

// Seeded synthetic land-cover rasters and building footprint sets. They stand
// in for real imagery labels in the bundled benchmark inputs and the tests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "pixground/geoquery.hpp"

namespace pixground::fixtures {

/// forest, water, cropland, grassland, built-up, bare soil as ids 1..6.
const std::map<int, std::string>& land_cover_names();

/// Nearest-site partition of the plane into a few land-cover regions, with
/// rectangular patches of other classes and sometimes a void strip.
SemanticRaster synthetic_raster(std::uint64_t seed, int width = 64, int height = 64);

/// Non-overlapping rectangular and diamond footprints on a jittered grid,
/// a seeded share of them destroyed.
BuildingSet synthetic_buildings(std::uint64_t seed, int width = 64, int height = 64);

struct FixtureCounts {
  int pgm_rasters = 0;
  int json_rasters = 0;
  int building_sets = 0;
};

/// Writes rNNN.pgm (+ .meta.json) for most rasters, every fourth one as a
/// JSON grid gNNN.json instead, and bNNN.buildings.json footprint files.
FixtureCounts write_fixture_set(const std::filesystem::path& dir, int rasters, int building_sets,
                                std::uint64_t seed);

}  // namespace pixground::fixtures
