// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <mutex>
#include <unordered_map>

#include "obliqc/reference_backend.hpp"

namespace obliqc {

/// Recording wrapper around another backend: every gate op forwards to the
/// inner backend and appends exactly one trace record. Also tracks the gate
/// depth of every produced value. Trace appends are serialized, so traced
/// programs should run single-threaded.
class TraceBackend : public Backend {
public:
  /// Wraps a fresh ReferenceBackend by default.
  explicit TraceBackend(std::unique_ptr<Backend> inner = nullptr);

  const BackendDescriptor& descriptor() const override { return desc_; }

  CircuitTrace trace() const;
  void clear_trace();
  size_t max_depth() const;

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

private:
  size_t depth_of(uint64_t id) const;
  void record(GateKind kind, uint8_t arity, int width, uint64_t out_id,
              size_t in_depth);

  std::unique_ptr<Backend> inner_;
  BackendDescriptor desc_;
  mutable std::mutex mu_;
  CircuitTrace trace_;
  size_t max_depth_ = 0;
  std::unordered_map<uint64_t, size_t> depths_;
};

/// Runs `program` over freshly encrypted inputs on a trace backend and
/// returns the gate log. Re-running with different values of identical shape
/// must yield an identical trace; that comparison is the obliviousness check.
CircuitTrace trace_program(
    const std::function<void(Backend&, std::span<const ObliviousHandle>,
                             const SessionKeys&)>& program,
    std::span<const std::vector<int64_t>> inputs, int width);

}  // namespace obliqc
