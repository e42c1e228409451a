// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <mutex>

#include "obliqc/wire.hpp"

namespace obliqc::wire {

enum class Direction : uint8_t { sent = 0, received = 1 };

/// Cumulative wire bytes for one session, split by message kind and
/// direction. Counts whole frames (header + payload); totals are monotone.
class TransferLedger {
public:
  void add(Kind kind, Direction dir, size_t frame_bytes);

  uint64_t total(Direction dir) const;
  uint64_t total(Kind kind, Direction dir) const;
  uint64_t grand_total() const;

  struct Row {
    Kind kind;
    uint64_t sent;
    uint64_t received;
  };
  std::vector<Row> rows() const;  // kinds with any traffic, in kind order

private:
  static constexpr size_t kKinds = 8;
  mutable std::mutex mu_;
  std::array<std::array<uint64_t, 2>, kKinds> bytes_{};
};

}  // namespace obliqc::wire
