// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace obliqc {

/// Error codes shared across the engine. Wire errors map onto a stable
/// subset of these (see wire::ErrorPayload).
enum class Errc : uint16_t {
  // codec
  out_of_range = 1,
  precision_loss,
  config_mismatch,
  // backend
  backend_unavailable,
  stale_key_epoch,
  session_mismatch,
  width_mismatch,
  width_exceeded,
  overflow,
  empty_vector,
  // rules / planning
  shape_mismatch,
  plan_overflow,
  unattainable,
  unknown_rule,
  // wire
  bad_magic,
  unsupported_version,
  truncated_payload,
  malformed_payload,
  no_common_backend,
  no_common_width,
  unknown_session,
  // service / io
  io_error,
  config_error,
  connection_failed,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  Error(Errc code, const std::string& msg, int64_t detail)
      : std::runtime_error(msg), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }

  /// Context-dependent payload: offending index for batch errors, worst-case
  /// magnitude for plan rejections, -1 when unset.
  int64_t detail() const noexcept { return detail_; }

private:
  Errc code_;
  int64_t detail_ = -1;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) {
  throw Error(code, msg);
}

[[noreturn]] inline void fail(Errc code, const std::string& msg, int64_t detail) {
  throw Error(code, msg, detail);
}

}  // namespace obliqc
