// SPDX-License-Identifier: Apache-2.0
#include "obliqc/codec.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace obliqc {

namespace {

uint32_t fnv1a(const void* data, size_t n, uint32_t h = 0x811c9dc5u) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x01000193u;
  }
  return h;
}

}  // namespace

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::out_of_range: return "out_of_range";
    case Errc::precision_loss: return "precision_loss";
    case Errc::config_mismatch: return "config_mismatch";
    case Errc::backend_unavailable: return "backend_unavailable";
    case Errc::stale_key_epoch: return "stale_key_epoch";
    case Errc::session_mismatch: return "session_mismatch";
    case Errc::width_mismatch: return "width_mismatch";
    case Errc::width_exceeded: return "width_exceeded";
    case Errc::overflow: return "overflow";
    case Errc::empty_vector: return "empty_vector";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::plan_overflow: return "plan_overflow";
    case Errc::unattainable: return "unattainable";
    case Errc::unknown_rule: return "unknown_rule";
    case Errc::bad_magic: return "bad_magic";
    case Errc::unsupported_version: return "unsupported_version";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::malformed_payload: return "malformed_payload";
    case Errc::no_common_backend: return "no_common_backend";
    case Errc::no_common_width: return "no_common_width";
    case Errc::unknown_session: return "unknown_session";
    case Errc::io_error: return "io_error";
    case Errc::config_error: return "config_error";
    case Errc::connection_failed: return "connection_failed";
  }
  return "unknown";
}

int64_t FixedPointConfig::width_max(int width) {
  return (int64_t{1} << (width - 1)) - 1;
}

int64_t FixedPointConfig::width_min(int width) {
  return -(int64_t{1} << (width - 1));
}

void FixedPointConfig::validate() const {
  if (width != 16 && width != 32)
    fail(Errc::config_error, "codec width must be 16 or 32");
  if (scale <= 0) fail(Errc::config_error, "codec scale must be positive");
  if (!(lo <= hi)) fail(Errc::config_error, "codec range requires lo <= hi");
  const double bound = std::max(std::fabs(lo), std::fabs(hi)) * double(scale);
  if (2.0 * bound > double(width_max(width)))
    fail(Errc::config_error,
         "scale * range does not fit width with headroom for addition");
}

uint32_t FixedPointConfig::id() const {
  uint32_t h = fnv1a(&scale, sizeof scale);
  h = fnv1a(&width, sizeof width, h);
  h = fnv1a(&lo, sizeof lo, h);
  h = fnv1a(&hi, sizeof hi, h);
  return h;
}

namespace {

int64_t round_half_away(double v) {
  // llround rounds halfway cases away from zero, which is the codec contract.
  return std::llround(v);
}

}  // namespace

int64_t FixedPointConfig::raw_lo() const { return round_half_away(lo * double(scale)); }
int64_t FixedPointConfig::raw_hi() const { return round_half_away(hi * double(scale)); }

EncodedValue encode(double x, const FixedPointConfig& cfg, bool strict) {
  if (x < cfg.lo || x > cfg.hi)
    fail(Errc::out_of_range, "value outside codec range");
  const double scaled = x * double(cfg.scale);
  if (strict && std::fabs(scaled - std::nearbyint(scaled)) > 1e-9)
    fail(Errc::precision_loss, "input carries more precision than the codec");
  return EncodedValue{round_half_away(scaled), cfg.id()};
}

double decode(const EncodedValue& v, const FixedPointConfig& cfg) {
  if (v.config_id != cfg.id())
    fail(Errc::config_mismatch, "encoded value belongs to a different config");
  return double(v.raw) / double(cfg.scale);
}

std::vector<EncodedValue> encode_batch(std::span<const double> xs,
                                       const FixedPointConfig& cfg,
                                       bool strict) {
  std::vector<EncodedValue> out;
  out.reserve(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    try {
      out.push_back(encode(xs[i], cfg, strict));
    } catch (const Error& e) {
      fail(e.code(), std::string(e.what()) + " at index " + std::to_string(i),
           int64_t(i));
    }
  }
  return out;
}

std::vector<double> decode_batch(std::span<const EncodedValue> vs,
                                 const FixedPointConfig& cfg) {
  std::vector<double> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(decode(v, cfg));
  return out;
}

int64_t parse_decimal(const std::string& text, const FixedPointConfig& cfg) {
  size_t i = 0;
  bool neg = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    neg = text[i] == '-';
    ++i;
  }
  if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i])))
    fail(Errc::malformed_payload, "not a decimal: '" + text + "'");
  int64_t whole = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    whole = whole * 10 + (text[i] - '0');
    if (whole > (int64_t{1} << 40)) fail(Errc::out_of_range, "decimal too large");
    ++i;
  }
  int64_t frac = 0;
  int64_t frac_pow = 1;
  if (i < text.size() && text[i] == '.') {
    ++i;
    if (i >= text.size()) fail(Errc::malformed_payload, "trailing decimal point");
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      frac = frac * 10 + (text[i] - '0');
      frac_pow *= 10;
      if (frac_pow > (int64_t{1} << 40))
        fail(Errc::precision_loss, "fraction longer than the codec preserves");
      ++i;
    }
  }
  if (i != text.size())
    fail(Errc::malformed_payload, "trailing characters in decimal: '" + text + "'");
  if ((frac * cfg.scale) % frac_pow != 0)
    fail(Errc::precision_loss,
         "'" + text + "' is not representable at scale " + std::to_string(cfg.scale));
  int64_t raw = whole * cfg.scale + (frac * cfg.scale) / frac_pow;
  if (neg) raw = -raw;
  if (raw < cfg.raw_lo() || raw > cfg.raw_hi())
    fail(Errc::out_of_range, "value outside codec range: '" + text + "'");
  return raw;
}

std::string format_decimal(int64_t raw, const FixedPointConfig& cfg) {
  int digits = 0;
  int64_t s = cfg.scale;
  while (s % 10 == 0 && s > 1) {
    s /= 10;
    ++digits;
  }
  if (s != 1) {
    // Non power-of-ten scale: fall back to a plain double rendering.
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", double(raw) / double(cfg.scale));
    return buf;
  }
  const bool neg = raw < 0;
  const uint64_t mag = neg ? uint64_t(-(raw + 1)) + 1 : uint64_t(raw);
  const uint64_t scale = uint64_t(cfg.scale);
  std::string out = neg ? "-" : "";
  out += std::to_string(mag / scale);
  if (digits > 0) {
    std::string f = std::to_string(mag % scale);
    out += '.';
    out += std::string(size_t(digits) - f.size(), '0');
    out += f;
  }
  return out;
}

}  // namespace obliqc
