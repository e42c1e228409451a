// SPDX-License-Identifier: Apache-2.0
#include "obliqc/ledger.hpp"

namespace obliqc::wire {

void TransferLedger::add(Kind kind, Direction dir, size_t frame_bytes) {
  std::lock_guard lk(mu_);
  bytes_[size_t(kind)][size_t(dir)] += frame_bytes;
}

uint64_t TransferLedger::total(Direction dir) const {
  std::lock_guard lk(mu_);
  uint64_t t = 0;
  for (const auto& per_kind : bytes_) t += per_kind[size_t(dir)];
  return t;
}

uint64_t TransferLedger::total(Kind kind, Direction dir) const {
  std::lock_guard lk(mu_);
  return bytes_[size_t(kind)][size_t(dir)];
}

uint64_t TransferLedger::grand_total() const {
  std::lock_guard lk(mu_);
  uint64_t t = 0;
  for (const auto& per_kind : bytes_) t += per_kind[0] + per_kind[1];
  return t;
}

std::vector<TransferLedger::Row> TransferLedger::rows() const {
  std::lock_guard lk(mu_);
  std::vector<Row> out;
  for (size_t k = 1; k < kKinds; ++k) {
    if (bytes_[k][0] == 0 && bytes_[k][1] == 0) continue;
    out.push_back({Kind(k), bytes_[k][0], bytes_[k][1]});
  }
  return out;
}

}  // namespace obliqc::wire
