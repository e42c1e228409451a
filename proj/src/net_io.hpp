// SPDX-License-Identifier: Apache-2.0
// Blocking socket helpers shared by the server and client. Not installed.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obliqc/wire.hpp"

namespace obliqc::net {

struct Endpoint {
  std::string host;
  uint16_t port = 0;
};

/// Parses "host:port". Throws config_error on nonsense.
Endpoint parse_addr(const std::string& addr);

void write_all(int fd, std::span<const uint8_t> bytes);  // io_error on failure

/// Reads exactly n bytes; returns false on clean EOF at a frame boundary,
/// throws io_error mid-read.
bool read_exact(int fd, uint8_t* out, size_t n);

/// Reads one whole frame. nullopt on clean EOF before a header.
std::optional<std::vector<uint8_t>> read_frame(int fd);

int connect_to(const Endpoint& ep);  // connection_failed on refusal

}  // namespace obliqc::net
