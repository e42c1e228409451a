// SPDX-License-Identifier: Apache-2.0
#include "obliqc/handshake.hpp"

#include <algorithm>

namespace obliqc::wire {

Agreement agree(const Caps& client, const Caps& server) {
  Agreement a;

  bool backend_found = false;
  for (const auto& b : server.backends) {
    if (std::find(client.backends.begin(), client.backends.end(), b) !=
        client.backends.end()) {
      a.backend = b;
      backend_found = true;
      break;
    }
  }
  if (!backend_found)
    fail(Errc::no_common_backend, "no backend supported by both ends");

  bool width_found = false;
  for (uint16_t w : server.widths) {
    if (std::find(client.widths.begin(), client.widths.end(), w) !=
        client.widths.end()) {
      a.width = w;
      width_found = true;
      break;
    }
  }
  if (!width_found) fail(Errc::no_common_width, "no width supported by both ends");

  const uint8_t modes = client.key_modes & server.key_modes;
  if (modes == 0)
    fail(Errc::no_common_backend, "no key mode supported by both ends");
  // Server preference: diff-key when its policy allows it and the client can.
  if ((server.key_modes & kKeyModeDiff) && (modes & kKeyModeDiff)) {
    a.key_mode = kKeyModeDiff;
    a.cadence = server.cadence != 0 ? server.cadence : 1;
  } else {
    a.key_mode = kKeyModeSame;
    a.cadence = 0;
  }

  a.scale = server.scale;
  return a;
}

}  // namespace obliqc::wire
