#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "pixground/error.hpp"
#include "pixground/geoquery.hpp"

namespace pixground {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, path.string() + ": " + e.what());
  }
}

std::map<int, std::string> names_from_json(const nlohmann::json& j) {
  std::map<int, std::string> names;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size()) throw Error(ErrorCode::schema, "class_names key '" + key + "' is not an integer");
    names[id] = value.get<std::string>();
  }
  return names;
}

nlohmann::json names_to_json(const std::map<int, std::string>& names) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, name] : names) j[std::to_string(id)] = name;
  return j;
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c = 0;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int pgm_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::schema, path.string() + ": bad PGM header token '" + tok + "'");
}

std::filesystem::path meta_path(const std::filesystem::path& pgm) {
  return pgm.parent_path() / (pgm.stem().string() + ".meta.json");
}

}  // namespace

SemanticRaster raster_from_json(const nlohmann::json& j) {
  SemanticRaster r;
  try {
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    r.resolution = j.value("resolution", 10.0);
    r.labels = j.at("labels").get<std::vector<std::int32_t>>();
    if (j.contains("class_names")) r.class_names = names_from_json(j.at("class_names"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, std::string("raster: ") + e.what());
  }
  r.validate();
  return r;
}

nlohmann::json to_json(const SemanticRaster& raster) {
  return {{"width", raster.width},
          {"height", raster.height},
          {"resolution", raster.resolution},
          {"labels", raster.labels},
          {"class_names", names_to_json(raster.class_names)}};
}

SemanticRaster load_pgm_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  const std::string magic = pgm_token(in);
  if (magic != "P5" && magic != "P2") throw Error(ErrorCode::schema, path.string() + ": not a PGM file");
  SemanticRaster r;
  r.width = pgm_int(in, path);
  r.height = pgm_int(in, path);
  const int maxval = pgm_int(in, path);
  if (r.width < 1 || r.height < 1 || maxval < 1 || maxval > 65535) {
    throw Error(ErrorCode::schema, path.string() + ": bad PGM header");
  }
  const std::size_t n = std::size_t(r.width) * std::size_t(r.height);
  r.labels.resize(n);
  if (magic == "P5") {
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * std::size_t(bytes));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw Error(ErrorCode::schema, path.string() + ": truncated PGM data");
    }
    for (std::size_t i = 0; i < n; ++i) {
      r.labels[i] = bytes == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) r.labels[i] = pgm_int(in, path);
  }

  const auto meta = meta_path(path);
  if (std::filesystem::exists(meta)) {
    const auto j = read_json(meta);
    r.resolution = j.value("resolution", 10.0);
    if (j.contains("class_names")) r.class_names = names_from_json(j.at("class_names"));
  } else {
    for (const auto& [id, count] : r.class_counts()) r.class_names[id] = "class_" + std::to_string(id);
  }
  r.validate();
  return r;
}

void save_pgm_raster(const SemanticRaster& raster, const std::filesystem::path& path) {
  raster.validate();
  int maxval = 1;
  for (auto l : raster.labels) maxval = std::max(maxval, static_cast<int>(l));
  if (maxval > 255) throw Error(ErrorCode::invalid_argument, "PGM output supports class ids up to 255");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "P5\n" << raster.width << ' ' << raster.height << "\n255\n";
  std::string bytes(raster.labels.size(), '\0');
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(raster.labels[i]);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));

  std::ofstream meta(meta_path(path));
  if (!meta) throw Error(ErrorCode::io, "cannot write " + meta_path(path).string());
  meta << nlohmann::json{{"resolution", raster.resolution}, {"class_names", names_to_json(raster.class_names)}}.dump(2)
       << '\n';
}

SemanticRaster load_raster(const std::filesystem::path& path) {
  if (path.extension() == ".pgm") return load_pgm_raster(path);
  return raster_from_json(read_json(path));
}

BuildingSet buildings_from_json(const nlohmann::json& j) {
  BuildingSet b;
  try {
    b.width = j.at("width").get<int>();
    b.height = j.at("height").get<int>();
    for (const auto& rec : j.at("buildings")) {
      Polygon poly;
      for (const auto& v : rec.at("polygon")) {
        if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::schema, "polygon vertex must be [x, y]");
        poly.push_back({v[0].get<double>(), v[1].get<double>()});
      }
      b.polygons.push_back(std::move(poly));
      const auto label = rec.at("label").get<std::string>();
      b.labels.push_back(label == "destroyed" ? DamageLabel::destroyed : DamageLabel::other);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, std::string("buildings: ") + e.what());
  }
  b.validate();
  return b;
}

nlohmann::json to_json(const BuildingSet& buildings) {
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < buildings.polygons.size(); ++i) {
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& p : buildings.polygons[i]) poly.push_back({p.x, p.y});
    list.push_back({{"polygon", poly},
                    {"label", buildings.labels[i] == DamageLabel::destroyed ? "destroyed" : "other"}});
  }
  return {{"width", buildings.width}, {"height", buildings.height}, {"buildings", list}};
}

BuildingSet load_buildings(const std::filesystem::path& path) { return buildings_from_json(read_json(path)); }

}  // namespace pixground
