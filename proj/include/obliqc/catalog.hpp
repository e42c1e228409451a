// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>

#include "obliqc/rules.hpp"
#include "obliqc/wire.hpp"

namespace obliqc {

/// One server-side rule: its control parameters and the codec range its
/// inputs live in. scale/width come from the handshake.
struct CatalogEntry {
  rules::RuleSpec spec;
  double lo = 0.0;
  double hi = 100.0;
};

struct Catalog {
  std::map<std::string, CatalogEntry> entries;  // keyed by rule name

  const CatalogEntry& at(const std::string& rule) const;

  /// Client-visible face: shapes and ranges, no control parameters.
  std::vector<wire::RuleAdvert> adverts(int64_t scale) const;
};

/// Parses the JSON rule catalog. Fails with config_error unless at least one
/// rule parses and validates.
Catalog load_catalog(const std::string& path);
Catalog parse_catalog(const std::string& json_text);

/// A built-in catalog used by tests and the bench harness.
Catalog default_catalog();

}  // namespace obliqc
