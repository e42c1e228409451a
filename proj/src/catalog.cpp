// SPDX-License-Identifier: Apache-2.0
#include "obliqc/catalog.hpp"

#include <fstream>
#include <json.hpp>

namespace obliqc {

using nlohmann::json;

const CatalogEntry& Catalog::at(const std::string& rule) const {
  auto it = entries.find(rule);
  if (it == entries.end()) fail(Errc::unknown_rule, "rule '" + rule + "' not in catalog");
  return it->second;
}

std::vector<wire::RuleAdvert> Catalog::adverts(int64_t scale) const {
  std::vector<wire::RuleAdvert> out;
  for (const auto& [name, entry] : entries) {
    wire::RuleAdvert ra;
    ra.rule = name;
    ra.shape_kind = entry.spec.id == rules::RuleId::r3 ? 1 : 0;
    ra.window = uint32_t(entry.spec.window);
    ra.rows = uint32_t(entry.spec.rows);
    ra.cols = uint32_t(entry.spec.cols);
    ra.raw_lo = std::llround(entry.lo * double(scale));
    ra.raw_hi = std::llround(entry.hi * double(scale));
    out.push_back(std::move(ra));
  }
  return out;
}

Catalog parse_catalog(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(Errc::config_error, std::string("catalog is not valid JSON: ") + e.what());
  }
  Catalog cat;
  try {
    for (const auto& item : doc.at("rules")) {
      CatalogEntry entry;
      const std::string name = item.at("id").get<std::string>();
      entry.spec.id = rules::rule_from_name(name);
      entry.spec.target_mean = item.at("target_mean").get<double>();
      entry.spec.target_sd = item.at("target_sd").get<double>();
      if (entry.spec.id == rules::RuleId::r3) {
        entry.spec.rows = item.at("rows").get<int>();
        entry.spec.cols = item.at("cols").get<int>();
      } else {
        entry.spec.window = item.at("window").get<int>();
      }
      entry.lo = item.value("lo", 0.0);
      entry.hi = item.value("hi", 100.0);
      entry.spec.validate();
      cat.entries[name] = entry;
    }
  } catch (const json::exception& e) {
    fail(Errc::config_error, std::string("catalog field error: ") + e.what());
  }
  if (cat.entries.empty())
    fail(Errc::config_error, "catalog must define at least one rule");
  return cat;
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::config_error, "cannot open catalog " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_catalog(text);
}

Catalog default_catalog() {
  Catalog cat;
  {
    CatalogEntry e;
    e.spec = {.id = rules::RuleId::r1, .target_mean = 50.0, .target_sd = 2.0,
              .window = 8};
    e.lo = 0.0;
    e.hi = 100.0;
    cat.entries["R1"] = e;
  }
  {
    CatalogEntry e;
    e.spec = {.id = rules::RuleId::r2, .target_mean = 50.0, .target_sd = 2.0,
              .window = 8};
    e.lo = 0.0;
    e.hi = 100.0;
    cat.entries["R2"] = e;
  }
  {
    // Narrow analyte range: keeps the squared-deviation intermediates inside
    // 32 bits for wide rows (see the rule-3 plan bounds).
    CatalogEntry e;
    e.spec = {.id = rules::RuleId::r3, .target_mean = 50.0, .target_sd = 0.4,
              .rows = 4, .cols = 8};
    e.lo = 40.0;
    e.hi = 60.0;
    cat.entries["R3"] = e;
  }
  return cat;
}

}  // namespace obliqc
