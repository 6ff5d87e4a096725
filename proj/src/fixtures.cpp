#include "pixground/fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "pixground/error.hpp"

namespace pixground::fixtures {

namespace {

int uniform(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(rng() % std::uint64_t(hi - lo + 1)); }

std::string numbered(const char* prefix, int k, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03d%s", prefix, k, suffix);
  return buf;
}

}  // namespace

const std::map<int, std::string>& land_cover_names() {
  static const std::map<int, std::string> names = {{1, "forest"},    {2, "water"},    {3, "cropland"},
                                                   {4, "grassland"}, {5, "built-up"}, {6, "bare soil"}};
  return names;
}

SemanticRaster synthetic_raster(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  SemanticRaster r;
  r.width = width;
  r.height = height;
  r.resolution = 10.0;
  r.class_names = land_cover_names();
  r.labels.assign(std::size_t(width) * std::size_t(height), 0);

  std::vector<int> classes{1, 2, 3, 4, 5, 6};
  for (std::size_t i = classes.size(); i > 1; --i) std::swap(classes[i - 1], classes[rng() % i]);

  struct Site {
    int x, y, cls;
  };
  const int n_sites = uniform(rng, 2, 4);
  std::vector<Site> sites;
  for (int s = 0; s < n_sites; ++s) {
    sites.push_back({uniform(rng, 0, width - 1), uniform(rng, 0, height - 1), classes[std::size_t(s)]});
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      long best = -1;
      int cls = 0;
      for (const auto& s : sites) {
        const long d = long(x - s.x) * (x - s.x) + long(y - s.y) * (y - s.y);
        if (best < 0 || d < best) {
          best = d;
          cls = s.cls;
        }
      }
      r.labels[std::size_t(y) * width + x] = cls;
    }
  }

  // Patches of classes that own no region, so some pairs sit far apart.
  const int n_patches = uniform(rng, 1, 3);
  for (int p = 0; p < n_patches; ++p) {
    const int cls = classes[std::size_t(n_sites + p % (6 - n_sites))];
    const int pw = uniform(rng, 5, 14);
    const int ph = uniform(rng, 5, 14);
    const int x0 = uniform(rng, 0, width - pw);
    const int y0 = uniform(rng, 0, height - ph);
    for (int y = y0; y < y0 + ph; ++y) {
      for (int x = x0; x < x0 + pw; ++x) r.labels[std::size_t(y) * width + x] = cls;
    }
  }

  if (rng() % 4 == 0) {
    const int rows = uniform(rng, 2, 8);
    std::fill(r.labels.begin(), r.labels.begin() + std::ptrdiff_t(rows) * width, 0);
  }
  return r;
}

BuildingSet synthetic_buildings(std::uint64_t seed, int width, int height) {
  std::mt19937_64 rng(seed);
  BuildingSet b;
  b.width = width;
  b.height = height;
  constexpr int cell = 12;
  std::vector<std::pair<int, int>> slots;
  for (int cy = 0; cy + cell <= height; cy += cell) {
    for (int cx = 0; cx + cell <= width; cx += cell) slots.emplace_back(cx, cy);
  }
  for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng() % i]);
  const int n = std::min<int>(uniform(rng, 9, 20), static_cast<int>(slots.size()));
  const int destroyed = uniform(rng, 2, std::max(2, n / 2));

  for (int k = 0; k < n; ++k) {
    const auto [cx, cy] = slots[std::size_t(k)];
    Polygon poly;
    if (rng() % 3 == 0) {
      const double mx = cx + uniform(rng, 4, 7);
      const double my = cy + uniform(rng, 4, 7);
      const double rad = uniform(rng, 2, 4);
      poly = {{mx, my - rad}, {mx + rad, my}, {mx, my + rad}, {mx - rad, my}};
    } else {
      const double x0 = cx + uniform(rng, 1, 3);
      const double y0 = cy + uniform(rng, 1, 3);
      const double x1 = x0 + uniform(rng, 3, 7);
      const double y1 = y0 + uniform(rng, 3, 7);
      poly = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    }
    b.polygons.push_back(std::move(poly));
    b.labels.push_back(k < destroyed ? DamageLabel::destroyed : DamageLabel::other);
  }
  // Interleave destroyed and intact footprints across the image.
  std::vector<std::size_t> order(b.polygons.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  BuildingSet shuffled{b.width, b.height, {}, {}};
  for (auto i : order) {
    shuffled.polygons.push_back(b.polygons[i]);
    shuffled.labels.push_back(b.labels[i]);
  }
  return shuffled;
}

FixtureCounts write_fixture_set(const std::filesystem::path& dir, int rasters, int building_sets, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  FixtureCounts counts;
  for (int k = 0; k < rasters; ++k) {
    const SemanticRaster r = synthetic_raster(seed * 1000003ULL + std::uint64_t(k));
    if (k % 4 == 3) {
      std::ofstream out(dir / numbered("g", k, ".json"));
      if (!out) throw Error(ErrorCode::io, "cannot write into " + dir.string());
      out << to_json(r).dump() << '\n';
      ++counts.json_rasters;
    } else {
      save_pgm_raster(r, dir / numbered("r", k, ".pgm"));
      ++counts.pgm_rasters;
    }
  }
  for (int k = 0; k < building_sets; ++k) {
    const BuildingSet b = synthetic_buildings(seed * 7919ULL + 0x5bd1e995ULL + std::uint64_t(k));
    std::ofstream out(dir / numbered("b", k, ".buildings.json"));
    if (!out) throw Error(ErrorCode::io, "cannot write into " + dir.string());
    out << to_json(b).dump(1) << '\n';
    ++counts.building_sets;
  }
  return counts;
}

}  // namespace pixground::fixtures
