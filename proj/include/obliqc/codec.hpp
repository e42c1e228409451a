// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "obliqc/error.hpp"

namespace obliqc {

/// Fixed-point codec configuration. Clinical decimals in [lo, hi] are carried
/// as signed integers of `width` bits, scaled by `scale` (default 100, i.e.
/// two decimal places).
///
/// A config is valid only if 2 * scale * max(|lo|, |hi|) fits the width: the
/// factor-2 headroom guarantees that one addition of any two encoded values
/// cannot overflow.
struct FixedPointConfig {
  int64_t scale = 100;
  int width = 16;  // 16 or 32
  double lo = 0.0;
  double hi = 100.0;

  void validate() const;

  /// Stable fingerprint of the four fields; encoded values remember it so
  /// decode can reject a mismatched config.
  uint32_t id() const;

  int64_t raw_lo() const;
  int64_t raw_hi() const;

  static int64_t width_max(int width);  // 2^(w-1) - 1
  static int64_t width_min(int width);  // -2^(w-1)
};

/// A decimal scaled into integer units under a specific config.
struct EncodedValue {
  int64_t raw = 0;
  uint32_t config_id = 0;

  friend bool operator==(const EncodedValue&, const EncodedValue&) = default;
};

/// Scale a decimal to integer units, rounding half away from zero.
///
/// Throws out_of_range if x is outside [lo, hi]. In strict mode, throws
/// precision_loss if x * scale is not integral within 1e-9 (the input has
/// more precision than the codec preserves); by default such inputs round.
EncodedValue encode(double x, const FixedPointConfig& cfg, bool strict = false);

/// Inverse of encode. Exact on every representable input.
double decode(const EncodedValue& v, const FixedPointConfig& cfg);

/// Element-wise encode; order preserved. On a range failure the error's
/// detail() carries the first offending index.
std::vector<EncodedValue> encode_batch(std::span<const double> xs,
                                       const FixedPointConfig& cfg,
                                       bool strict = false);

std::vector<double> decode_batch(std::span<const EncodedValue> vs,
                                 const FixedPointConfig& cfg);

/// Exact decimal-string conversions used by file ingestion. parse_decimal
/// accepts [-]digits[.digits] and fails with precision_loss if the fraction
/// cannot be represented at cfg.scale, out_of_range if outside [lo, hi].
int64_t parse_decimal(const std::string& text, const FixedPointConfig& cfg);
std::string format_decimal(int64_t raw, const FixedPointConfig& cfg);

}  // namespace obliqc
