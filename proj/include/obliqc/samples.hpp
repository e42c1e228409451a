// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

#include "obliqc/codec.hpp"
#include "obliqc/rules.hpp"

namespace obliqc {

/// Parsed lab-export CSV. The first line names the rule shape:
///   rule=R1,n=8        followed by one n-value window per line
///   rule=R3,rows=2,cols=3   followed by a rows x cols grid (one instance)
/// Values are strict decimals within the codec range; shape errors are
/// caught client-side before anything is encrypted.
struct SampleFile {
  rules::RuleId rule = rules::RuleId::r1;
  int window = 0;
  int rows = 0, cols = 0;
  // R1/R2: one vector per window instance. R3: `rows` vectors of `cols`.
  std::vector<std::vector<int64_t>> values_raw;

  size_t instance_count() const {
    return rule == rules::RuleId::r3 ? (values_raw.empty() ? 0 : 1)
                                     : values_raw.size();
  }
};

SampleFile parse_samples(std::istream& in, const FixedPointConfig& cfg);
SampleFile load_samples(const std::string& path, const FixedPointConfig& cfg);
void write_samples(std::ostream& out, const SampleFile& f,
                   const FixedPointConfig& cfg);

}  // namespace obliqc
