#include "hrsar/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hrsar {

using nlohmann::json;

namespace {

class TomlLine {
 public:
  TomlLine(std::string_view text, int line) : s_(text), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string key() {
    skip_ws();
    if (peek() == '"') return quoted();
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' ||
                                s_[pos_] == '-'))
      ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  json value() {
    const char c = peek();
    if (c == '"') return quoted();
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      while (true) {
        arr.push_back(value());
        const char d = peek();
        ++pos_;
        if (d == ']') return arr;
        if (d != ',') fail("expected ',' or ']' in array");
        if (peek() == ']') {
          ++pos_;
          return arr;
        }
      }
    }
    const auto start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
           s_[pos_] != '\t')
      ++pos_;
    std::string tok(s_.substr(start, pos_ - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok)
      if (ch != '_') digits += ch;
    if (digits.empty()) fail("missing value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    if (!is_float) {
      std::int64_t v = 0;
      const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
      const auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), v);
      if (ec == std::errc() && p == digits.data() + digits.size()) return v;
    } else {
      double v = 0.0;
      const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
      const auto [p, ec] = std::from_chars(b, digits.data() + digits.size(), v);
      if (ec == std::errc() && p == digits.data() + digits.size()) return v;
    }
    fail("cannot parse value '" + tok + "'");
  }

 private:
  std::string quoted() {
    expect('"');
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split_dotted(TomlLine& in) {
  std::vector<std::string> parts{in.key()};
  while (in.peek() == '.') {
    in.expect('.');
    parts.push_back(in.key());
  }
  return parts;
}

json& descend(json& root, const std::vector<std::string>& path, TomlLine& in) {
  json* node = &root;
  for (const auto& p : path) {
    json& next = (*node)[p];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) in.fail("'" + p + "' is already a value");
    node = &next;
  }
  return *node;
}

std::string toml_value(const json& v) {
  if (v.is_string()) return json(v.get<std::string>()).dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    auto s = os.str();
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_value(v[i]);
    return out + "]";
  }
  throw ConfigError("cannot express " + v.dump() + " as a TOML value");
}

// Typed access with unknown-key detection.
class Table {
 public:
  Table(const json& doc, const std::string& name) : name_(name) {
    if (doc.contains(name)) {
      if (!doc[name].is_object()) throw ConfigError("[" + name + "] must be a table");
      t_ = doc[name];
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!t_.contains(key)) return;
    try {
      const json& v = t_[key];
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected true or false");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.get<std::int64_t>() < 0) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("expected a number");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
    t_.erase(key);
  }

  bool has(const char* key) const { return t_.contains(key); }

  void finish() const {
    if (!t_.empty()) throw ConfigError("unknown key " + name_ + "." + t_.begin().key());
  }

 private:
  std::string name_;
  json t_ = json::object();
};

NormScope parse_scope(const std::string& s) {
  if (s == "recording") return NormScope::Recording;
  if (s == "tile") return NormScope::Tile;
  throw ConfigError("features.scope must be \"recording\" or \"tile\", got \"" + s + "\"");
}

Normalization parse_norm(const std::string& s) {
  if (s == "none") return Normalization::None;
  if (s == "instance") return Normalization::Instance;
  throw ConfigError("topology.normalization must be \"none\" or \"instance\", got \"" + s + "\"");
}

}  // namespace

json parse_toml(std::string_view text) {
  json root = json::object();
  json* table = &root;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    start = end + 1;
    TomlLine in(line, line_no);
    if (in.at_end()) continue;
    if (in.peek() == '[') {
      in.expect('[');
      const auto path = split_dotted(in);
      in.expect(']');
      if (!in.at_end()) in.fail("trailing characters after table header");
      table = &descend(root, path, in);
      continue;
    }
    auto path = split_dotted(in);
    in.expect('=');
    json v = in.value();
    if (!in.at_end()) in.fail("trailing characters after value");
    const std::string leaf = path.back();
    path.pop_back();
    json& owner = descend(*table, path, in);
    if (owner.contains(leaf)) in.fail("duplicate key '" + leaf + "'");
    owner[leaf] = std::move(v);
  }
  return root;
}

json load_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

std::string to_toml(const json& doc) {
  std::ostringstream os;
  for (const auto& [k, v] : doc.items())
    if (!v.is_object()) os << k << " = " << toml_value(v) << '\n';
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_object()) continue;
    os << "\n[" << k << "]\n";
    for (const auto& [kk, vv] : v.items()) {
      if (vv.is_object()) throw ConfigError("to_toml: nested table " + k + "." + kk + " is not supported");
      os << kk << " = " << toml_value(vv) << '\n';
    }
  }
  return os.str();
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a table");
  for (const auto& [k, v] : doc.items())
    if (k != "features" && k != "topology" && k != "train" && k != "labels" && k != "data" && k != "scene")
      throw ConfigError("unknown config table [" + k + "]");

  RunConfig c;
  {
    Table t(doc, "features");
    auto& f = c.features;
    t.get("flights", f.flights);
    t.get("channels", f.channels);
    t.get("magnitude", f.use_magnitude);
    t.get("phase_cossin", f.use_phase_cos_sin);
    t.get("phase_reim", f.use_phase_re_im);
    t.get("phase_diff", f.use_phase_diff);
    std::vector<int> pair{f.diff_pair.first, f.diff_pair.second};
    t.get("diff_pair", pair);
    if (pair.size() != 2) throw ConfigError("features.diff_pair must hold two channels");
    f.diff_pair = {pair[0], pair[1]};
    t.get("percentile", f.percentile);
    t.get("range_db", f.range_db);
    std::string scope = f.scope == NormScope::Recording ? "recording" : "tile";
    t.get("scope", scope);
    f.scope = parse_scope(scope);
    t.finish();
  }
  {
    Table t(doc, "topology");
    auto& n = c.topology;
    n.input_channels = static_cast<int>(c.features.plane_count());
    if (t.has("input_channels")) {
      int declared = 0;
      t.get("input_channels", declared);
      if (declared != n.input_channels)
        throw ConfigError("topology.input_channels = " + std::to_string(declared) + " but the feature selection yields " +
                          std::to_string(n.input_channels) + " planes");
    }
    t.get("num_classes", n.num_classes);
    t.get("width", n.width);
    t.get("encoder_levels", n.encoder_levels);
    t.get("refine_from_level", n.refine_from_level);
    t.get("dilations", n.dilations);
    std::string norm = n.normalization == Normalization::None ? "none" : "instance";
    t.get("normalization", norm);
    n.normalization = parse_norm(norm);
    t.get("bias", n.bias);
    t.finish();
  }
  {
    Table t(doc, "train");
    auto& h = c.train;
    t.get("batch", h.batch);
    t.get("max_epochs", h.max_epochs);
    t.get("lr", h.lr);
    t.get("seed", h.seed);
    t.get("class_balancing", h.class_balancing);
    t.get("plateau_patience", h.plateau_patience);
    t.get("plateau_factor", h.plateau_factor);
    t.get("plateau_threshold", h.plateau_threshold);
    t.finish();
  }
  {
    Table t(doc, "labels");
    std::string v = to_string(c.road_variant);
    t.get("road_variant", v);
    c.road_variant = parse_road_variant(v);
    t.finish();
  }
  {
    Table t(doc, "data");
    t.get("tile_size", c.tile_size);
    t.get("train_fraction", c.train_fraction);
    t.finish();
  }
  {
    Table t(doc, "scene");
    auto& s = c.scene;
    t.get("width", s.width);
    t.get("height", s.height);
    t.get("flights", s.flights);
    t.get("channels", s.channels);
    t.get("seed", s.seed);
    t.get("building_count", s.building_count);
    t.get("building_min", s.building_min);
    t.get("building_max", s.building_max);
    t.get("max_rotation_rad", s.max_rotation_rad);
    t.get("road_count", s.road_count);
    t.get("road_ranks", s.road_ranks);
    t.get("illumination", s.illumination);
    t.get("layover_px", s.layover_px);
    t.get("shadow_px", s.shadow_px);
    t.get("looks", s.looks);
    t.get("refl_background", s.refl_background);
    t.get("refl_building", s.refl_building);
    t.get("refl_layover", s.refl_layover);
    t.get("refl_shadow", s.refl_shadow);
    t.get("refl_road", s.refl_road);
    t.get("jitter_sigma_px", s.jitter_sigma_px);
    t.get("dropout", s.dropout);
    t.finish();
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  try {
    return from_json(load_toml(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json RunConfig::to_json() const {
  json doc;
  const auto& f = features;
  doc["features"] = {{"flights", f.flights},
                     {"channels", f.channels},
                     {"magnitude", f.use_magnitude},
                     {"phase_cossin", f.use_phase_cos_sin},
                     {"phase_reim", f.use_phase_re_im},
                     {"phase_diff", f.use_phase_diff},
                     {"diff_pair", {f.diff_pair.first, f.diff_pair.second}},
                     {"percentile", f.percentile},
                     {"range_db", f.range_db},
                     {"scope", f.scope == NormScope::Recording ? "recording" : "tile"}};
  const auto& n = topology;
  doc["topology"] = {{"input_channels", n.input_channels},
                     {"num_classes", n.num_classes},
                     {"width", n.width},
                     {"encoder_levels", n.encoder_levels},
                     {"refine_from_level", n.refine_from_level},
                     {"dilations", n.dilations},
                     {"normalization", n.normalization == Normalization::None ? "none" : "instance"},
                     {"bias", n.bias}};
  const auto& h = train;
  doc["train"] = {{"batch", h.batch},
                  {"max_epochs", h.max_epochs},
                  {"lr", h.lr},
                  {"seed", h.seed},
                  {"class_balancing", h.class_balancing},
                  {"plateau_patience", h.plateau_patience},
                  {"plateau_factor", h.plateau_factor},
                  {"plateau_threshold", h.plateau_threshold}};
  doc["labels"] = {{"road_variant", to_string(road_variant)}};
  doc["data"] = {{"tile_size", tile_size}, {"train_fraction", train_fraction}};
  const auto& s = scene;
  doc["scene"] = {{"width", s.width},
                  {"height", s.height},
                  {"flights", s.flights},
                  {"channels", s.channels},
                  {"seed", s.seed},
                  {"building_count", s.building_count},
                  {"building_min", s.building_min},
                  {"building_max", s.building_max},
                  {"max_rotation_rad", s.max_rotation_rad},
                  {"road_count", s.road_count},
                  {"road_ranks", s.road_ranks},
                  {"illumination", s.illumination},
                  {"layover_px", s.layover_px},
                  {"shadow_px", s.shadow_px},
                  {"looks", s.looks},
                  {"refl_background", s.refl_background},
                  {"refl_building", s.refl_building},
                  {"refl_layover", s.refl_layover},
                  {"refl_shadow", s.refl_shadow},
                  {"refl_road", s.refl_road},
                  {"jitter_sigma_px", s.jitter_sigma_px},
                  {"dropout", s.dropout}};
  return doc;
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
    throw ConfigError("override must look like table.key=value, got '" + std::string(assignment) + "'");
  const std::string table(assignment.substr(0, dot));
  const std::string key(assignment.substr(dot + 1, eq - dot - 1));
  TomlLine in(assignment.substr(eq + 1), 0);
  json value = in.value();
  if (!in.at_end()) throw ConfigError("override " + std::string(assignment) + ": trailing characters");

  json doc = to_json();
  if (table == "features") doc["topology"].erase("input_channels");
  if (!doc.contains(table) || !doc[table].contains(key))
    throw ConfigError("override names unknown setting " + table + "." + key);
  doc[table][key] = std::move(value);
  *this = from_json(doc);
}

void RunConfig::validate() const {
  features.validate();
  topology.validate();
  scene.validate();
  if (tile_size < 1) throw ConfigError("data.tile_size must be positive");
  if (tile_size % static_cast<std::uint64_t>(topology.size_divisor()) != 0)
    throw ConfigError("data.tile_size must be a multiple of " + std::to_string(topology.size_divisor()) +
                      " (2^encoder_levels)");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("data.train_fraction must lie in (0, 1)");
  if (train.batch < 1 || train.max_epochs < 1) throw ConfigError("train.batch and train.max_epochs must be positive");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
}

}  // namespace hrsar
