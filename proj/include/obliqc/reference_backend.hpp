// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <mutex>
#include <unordered_map>

#include "obliqc/backend.hpp"

namespace obliqc {

/// Synthetic cost model for desk-scale experiments. When gate_cost is
/// nonzero every gate busy-waits for that long, and the setup phases burn a
/// fixed multiple of it so batch sweeps amortize a realistic per-session
/// overhead. Zero disables all of it.
struct SyntheticCost {
  std::chrono::nanoseconds gate_cost{0};
  int keygen_gates = 150;
  int context_gates = 50;
  int encrypt_gates_per_slot = 2;
  int decrypt_gates_per_slot = 1;
};

/// Bit-exact plaintext backend with two's-complement semantics at the
/// declared width and wrap detection on: any gate whose result leaves the
/// width range throws overflow instead of wrapping. Keys are dummy but
/// structured; all artifact sizes are measured (and therefore zero).
class ReferenceBackend : public Backend {
public:
  explicit ReferenceBackend(SyntheticCost cost = {});

  const BackendDescriptor& descriptor() const override { return desc_; }

  SessionKeys keygen(const KeygenParams& params) override;
  SessionKeys rotate_keys(const SessionKeys& keys) override;
  void restore_session(const SessionKeys& keys) override;

  ObliviousHandle encrypt_raw(std::span<const int64_t> values, int width,
                              const SessionKeys& keys) override;
  std::vector<int64_t> decrypt_raw(const ObliviousHandle& h,
                                   const SessionKeys& keys) override;
  int decrypt_bit(const ObliviousBit& b, const SessionKeys& keys) override;

  ObliviousHandle slot(const ObliviousHandle& vec, size_t index) override;

  ObliviousHandle add(const ObliviousHandle& a, const ObliviousHandle& b) override;
  ObliviousHandle sub(const ObliviousHandle& a, const ObliviousHandle& b) override;
  ObliviousHandle mul(const ObliviousHandle& a, const ObliviousHandle& b) override;
  ObliviousHandle mul_plain(const ObliviousHandle& a, int64_t k) override;
  ObliviousHandle add_plain(const ObliviousHandle& a, int64_t k) override;
  ObliviousHandle shift_right(const ObliviousHandle& a, int bits) override;
  ObliviousHandle xor_word(const ObliviousHandle& a, const ObliviousHandle& b) override;
  ObliviousHandle and_word(const ObliviousHandle& a, const ObliviousHandle& b) override;
  ObliviousHandle mask_from_bit(const ObliviousBit& b, int width) override;
  ObliviousBit cmp_gt(const ObliviousHandle& a, int64_t threshold) override;
  ObliviousBit cmp_gt_ct(const ObliviousHandle& a, const ObliviousHandle& b) override;
  ObliviousBit bit_and(const ObliviousBit& a, const ObliviousBit& b) override;
  ObliviousBit bit_or(const ObliviousBit& a, const ObliviousBit& b) override;
  ObliviousBit bit_xor(const ObliviousBit& a, const ObliviousBit& b) override;
  ObliviousBit bit_not(const ObliviousBit& a) override;

  std::vector<uint8_t> serialize_handle(const ObliviousHandle& h) override;
  ObliviousHandle deserialize_handle(std::span<const uint8_t> blob,
                                     uint64_t session_id) override;
  std::vector<uint8_t> serialize_bit(const ObliviousBit& b) override;
  ObliviousBit deserialize_bit(std::span<const uint8_t> blob,
                               uint64_t session_id) override;

  std::map<std::string, std::vector<uint8_t>> export_artifacts(
      const SessionKeys& keys) override;
  void import_artifacts(
      uint64_t session_id, uint32_t epoch,
      const std::map<std::string, std::vector<uint8_t>>& artifacts) override;
  void advance_epoch(uint64_t session_id, uint32_t new_epoch) override;
  uint32_t session_epoch(uint64_t session_id) const override;

  const SyntheticCost& cost() const { return cost_; }

protected:
  // Derived backends (the masking test double) reuse the arithmetic core and
  // replace only the serialization layer.
  BackendDescriptor desc_;
  SyntheticCost cost_;

  std::shared_ptr<detail::SessionCtl> ctl(uint64_t session_id) const;
  std::shared_ptr<detail::SessionCtl> ctl_or_create(uint64_t session_id,
                                                    uint32_t epoch);
  void burn(int gates) const;

private:
  mutable std::mutex mu_;
  std::unordered_map<uint64_t, std::shared_ptr<detail::SessionCtl>> sessions_;
};

}  // namespace obliqc
