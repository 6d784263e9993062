#include "hrsar/annotations.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "hrsar/error.hpp"

namespace hrsar {

using nlohmann::json;

std::string to_string(AnnotationSource s) { return s == AnnotationSource::Osm ? "osm" : "swisstopo"; }

namespace {

[[noreturn]] void fail(std::size_t index, const std::string& msg) {
  throw ParseError("feature " + std::to_string(index) + ": " + msg);
}

Point parse_point(const json& j, std::size_t index) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number())
    fail(index, "coordinate must be an array [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Point> parse_points(const json& j, std::size_t index) {
  if (!j.is_array()) fail(index, "coordinates must be an array");
  std::vector<Point> pts;
  pts.reserve(j.size());
  for (const auto& c : j) pts.push_back(parse_point(c, index));
  return pts;
}

AnnotationSource parse_source(const std::string& s, std::size_t index) {
  if (s == "osm") return AnnotationSource::Osm;
  if (s == "swisstopo") return AnnotationSource::Swisstopo;
  fail(index, "unknown source '" + s + "'");
}

void check_ring(const Ring& ring, const std::string& where) {
  if (ring.size() < 3) throw ParseError(where + ": polygon ring needs at least 3 vertices");
}

}  // namespace

void AnnotationSet::validate() const {
  for (std::size_t i = 0; i < buildings.size(); ++i) {
    if (buildings[i].rings.empty()) throw ParseError("building " + std::to_string(i) + ": no rings");
    for (const Ring& r : buildings[i].rings) check_ring(r, "building " + std::to_string(i));
  }
  for (std::size_t i = 0; i < roads.size(); ++i) {
    if (roads[i].line.size() < 2) throw ParseError("road " + std::to_string(i) + ": polyline needs 2 vertices");
    if (roads[i].rank.empty()) throw ParseError("road " + std::to_string(i) + ": missing rank");
  }
}

AnnotationSet parse_annotations(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("annotation document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw ParseError("annotation document must be a GeoJSON FeatureCollection");

  AnnotationSet set;
  std::optional<AnnotationSource> source;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (!f.is_object() || !f.contains("geometry") || !f["geometry"].is_object()) fail(i, "missing geometry");
    const json props = f.contains("properties") && f["properties"].is_object() ? f["properties"] : json::object();

    if (props.contains("source")) {
      if (!props["source"].is_string()) fail(i, "source must be a string");
      const auto s = parse_source(props["source"].get<std::string>(), i);
      if (source && *source != s) fail(i, "mixed annotation sources in one document");
      source = s;
    }
    if (!props.contains("kind") || !props["kind"].is_string()) fail(i, "missing kind");
    const auto kind = props["kind"].get<std::string>();
    const auto& geom = f["geometry"];
    const std::string gtype = geom.value("type", "");
    if (!geom.contains("coordinates")) fail(i, "geometry without coordinates");

    if (kind == "building") {
      if (gtype != "Polygon") fail(i, "building geometry must be a Polygon, got '" + gtype + "'");
      const auto& rings = geom["coordinates"];
      if (!rings.is_array() || rings.empty()) fail(i, "polygon without rings");
      Polygon poly;
      for (const auto& rj : rings) {
        Ring ring = parse_points(rj, i);
        if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
        if (ring.size() < 3) fail(i, "polygon ring needs at least 3 distinct vertices");
        poly.rings.push_back(std::move(ring));
      }
      set.buildings.push_back(std::move(poly));
    } else if (kind == "road") {
      if (gtype != "LineString") fail(i, "road geometry must be a LineString, got '" + gtype + "'");
      Road road;
      road.line = parse_points(geom["coordinates"], i);
      if (road.line.size() < 2) fail(i, "road polyline needs at least 2 vertices");
      if (!props.contains("rank") || !props["rank"].is_string() || props["rank"].get<std::string>().empty())
        fail(i, "road without rank");
      road.rank = props["rank"].get<std::string>();
      set.roads.push_back(std::move(road));
    } else {
      fail(i, "unknown kind '" + kind + "'");
    }
  }
  set.source = source.value_or(AnnotationSource::Osm);
  return set;
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_annotations(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string to_geojson(const AnnotationSet& set) {
  auto coords = [](const std::vector<Point>& pts, bool close) {
    json arr = json::array();
    for (const Point& p : pts) arr.push_back({p.x, p.y});
    if (close && !pts.empty()) arr.push_back({pts.front().x, pts.front().y});
    return arr;
  };
  json features = json::array();
  const std::string src = to_string(set.source);
  for (const Polygon& poly : set.buildings) {
    json rings = json::array();
    for (const Ring& r : poly.rings) rings.push_back(coords(r, true));
    features.push_back({{"type", "Feature"},
                        {"properties", {{"source", src}, {"kind", "building"}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
  }
  for (const Road& road : set.roads) {
    features.push_back({{"type", "Feature"},
                        {"properties", {{"source", src}, {"kind", "road"}, {"rank", road.rank}}},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords(road.line, false)}}}});
  }
  json doc = {{"type", "FeatureCollection"}, {"features", features}};
  return doc.dump(1);
}

void write_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_geojson(set) << '\n';
}

}  // namespace hrsar
