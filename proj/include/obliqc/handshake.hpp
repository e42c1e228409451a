// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "obliqc/wire.hpp"

namespace obliqc::wire {

struct Agreement {
  std::string backend;
  uint16_t width = 0;
  uint32_t scale = 100;
  uint8_t key_mode = kKeyModeSame;  // single mode bit
  uint32_t cadence = 1;

  friend bool operator==(const Agreement&, const Agreement&) = default;
};

/// Deterministic capability agreement; the server's preference order wins.
/// Throws no_common_backend / no_common_width when the sets are disjoint.
/// Scale is dictated by the server (the codec the catalog was planned for).
Agreement agree(const Caps& client, const Caps& server);

}  // namespace obliqc::wire
