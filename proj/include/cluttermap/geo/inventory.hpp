#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluttermap/core/rng.hpp"
#include "cluttermap/geo/geo.hpp"
#include "cluttermap/io/csv.hpp"
#include "cluttermap/labels.hpp"

namespace cluttermap::geo {

// One georeferenced, labeled clutter object - the unit of sampling.
struct InventoryRecord {
  std::string id;
  GeoPoint point;
  ClutterLabel label = ClutterLabel::Other;
  std::string source;
  std::map<std::string, std::string> raw_attributes;
};

struct Inventory {
  std::vector<InventoryRecord> records;

  std::array<long long, kNumClutterLabels> class_histogram() const {
    std::array<long long, kNumClutterLabels> h{};
    for (const auto& r : records) ++h[static_cast<std::size_t>(r.label)];
    return h;
  }
};

// ---------------------------------------------------------------------------
// Source mapping tables
// ---------------------------------------------------------------------------

inline std::string fold_key(std::string s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// species string -> Deciduous | Coniferous
class SpeciesMap {
public:
  static SpeciesMap from_json(const nlohmann::json& j) {
    SpeciesMap m;
    for (const auto& [key, value] : j.items()) {
      const std::string v = fold_key(value.get<std::string>());
      ClutterLabel label;
      if (v == "deciduous") label = ClutterLabel::Deciduous;
      else if (v == "coniferous") label = ClutterLabel::Coniferous;
      else fail("species map entry '", key, "' must map to deciduous or coniferous, got '", v, "'");
      m.map_[fold_key(key)] = label;
    }
    return m;
  }

  void add(const std::string& species, ClutterLabel label) {
    require(label == ClutterLabel::Deciduous || label == ClutterLabel::Coniferous,
            "species must map to a tree class");
    map_[fold_key(species)] = label;
  }

  std::optional<ClutterLabel> lookup(const std::string& species) const {
    const auto it = map_.find(fold_key(species));
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

private:
  std::unordered_map<std::string, ClutterLabel> map_;
};

// Deterministic species classification; unknown species are routed to a
// review list by the caller, never silently dropped or defaulted.
inline std::optional<ClutterLabel> classify_species(const std::string& species,
                                                    const SpeciesMap& map) {
  if (fold_key(species).empty()) return std::nullopt;
  return map.lookup(species);
}

// building-type string -> Residential | NonResidential. An unmapped string is
// an explicit error naming the string.
class BuildingTypeMap {
public:
  static BuildingTypeMap from_json(const nlohmann::json& j) {
    BuildingTypeMap m;
    for (const auto& [key, value] : j.items()) {
      const std::string v = fold_key(value.get<std::string>());
      ClutterLabel label;
      if (v == "residential") label = ClutterLabel::Residential;
      else if (v == "non_residential" || v == "non-residential") label = ClutterLabel::NonResidential;
      else fail("building type map entry '", key, "' must map to residential or non_residential, got '", v, "'");
      m.map_[fold_key(key)] = label;
    }
    return m;
  }

  void add(const std::string& type, ClutterLabel label) {
    require(label == ClutterLabel::Residential || label == ClutterLabel::NonResidential,
            "building type must map to a building class");
    map_[fold_key(type)] = label;
  }

  ClutterLabel lookup(const std::string& type) const {
    const auto it = map_.find(fold_key(type));
    if (it == map_.end())
      fail("unmapped building type '", type, "' (extend the building-type map)");
    return it->second;
  }

  bool contains(const std::string& type) const {
    return map_.count(fold_key(type)) > 0;
  }

private:
  std::unordered_map<std::string, ClutterLabel> map_;
};

// ---------------------------------------------------------------------------
// Inventory assembly
// ---------------------------------------------------------------------------

// Concatenates the per-source record lists under namespaced ids
// ("<source>:<id>"). Duplicate namespaced ids are rejected.
inline Inventory build_inventory(const std::vector<InventoryRecord>& trees,
                                 const std::vector<InventoryRecord>& buildings,
                                 const std::vector<InventoryRecord>& others) {
  Inventory inv;
  std::unordered_set<std::string> seen;
  auto append = [&](const std::vector<InventoryRecord>& src) {
    for (InventoryRecord r : src) {
      require(!r.source.empty(), "record ", r.id, " has no source");
      r.id = r.source + ":" + r.id;
      require(seen.insert(r.id).second, "duplicate inventory id ", r.id);
      r.point.validate();
      inv.records.push_back(std::move(r));
    }
  };
  append(trees);
  append(buildings);
  append(others);
  return inv;
}

// Per-class sampling quota: caps each class at quota[label] records, chosen
// by a seeded shuffle. Classes without an entry keep everything.
inline Inventory apply_class_quotas(
    const Inventory& inv, const std::map<ClutterLabel, std::size_t>& quotas,
    std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClutterLabels> by_class;
  for (std::size_t i = 0; i < inv.records.size(); ++i)
    by_class[static_cast<std::size_t>(inv.records[i].label)].push_back(i);
  std::vector<bool> keep(inv.records.size(), true);
  Rng rng(derive_seed(seed, "class-quotas"));
  for (ClutterLabel label : all_clutter_labels) {
    const auto it = quotas.find(label);
    if (it == quotas.end()) continue;
    auto& idx = by_class[static_cast<std::size_t>(label)];
    if (idx.size() <= it->second) continue;
    rng.shuffle(idx);
    for (std::size_t i = it->second; i < idx.size(); ++i) keep[idx[i]] = false;
  }
  Inventory out;
  for (std::size_t i = 0; i < inv.records.size(); ++i)
    if (keep[i]) out.records.push_back(inv.records[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Inventory CSV: header id,lat,lon,label,source,attr_json
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& inventory_csv_header() {
  static const std::vector<std::string> header{"id",    "lat",    "lon",
                                               "label", "source", "attr_json"};
  return header;
}

inline void write_inventory(const Inventory& inv, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(inv.records.size());
  for (const auto& r : inv.records) {
    nlohmann::json attrs(r.raw_attributes);
    rows.push_back({r.id, io::format_double(r.point.lat),
                    io::format_double(r.point.lon),
                    std::string(label_name(r.label)), r.source, attrs.dump()});
  }
  io::write_csv(path, inventory_csv_header(), rows);
}

inline Inventory read_inventory(const std::string& path) {
  const auto table = io::read_csv(path, inventory_csv_header());
  Inventory inv;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.line_numbers[i];
    InventoryRecord r;
    r.id = row[0];
    require(seen.insert(r.id).second, path, " line ", line, ": duplicate id ",
            r.id);
    r.point.lat = io::parse_double(row[1], "latitude", line);
    r.point.lon = io::parse_double(row[2], "longitude", line);
    try {
      r.point.validate();
      r.label = parse_clutter_label(row[3]);
    } catch (const Error& e) {
      fail(path, " line ", line, ": ", e.what());
    }
    r.source = row[4];
    if (!row[5].empty()) {
      nlohmann::json attrs;
      try {
        attrs = nlohmann::json::parse(row[5]);
      } catch (const nlohmann::json::exception& e) {
        fail(path, " line ", line, ": bad attr_json: ", e.what());
      }
      for (const auto& [k, v] : attrs.items())
        r.raw_attributes[k] = v.get<std::string>();
    }
    inv.records.push_back(std::move(r));
  }
  return inv;
}

}  // namespace cluttermap::geo
