// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "obliqc/codec.hpp"
#include "obliqc/error.hpp"

namespace obliqc {

enum class BackendKind : uint8_t {
  reference_plaintext,
  circuit_trace,
  external_fhe,
};

struct BackendDescriptor {
  std::string name;
  BackendKind kind = BackendKind::reference_plaintext;
  int security_bits = 0;  // must be >= 128 for external_fhe
  bool supports_batching = false;
  int max_width = 32;

  void validate() const;
};

struct KeygenParams {
  int width = 32;
  int security_bits = 0;
};

/// Client-side key record for one session. serialized_sizes holds measured
/// byte sizes of every generated artifact (context, public key, evaluation
/// keys) — always taken from the actual blobs, never estimated.
struct SessionKeys {
  uint64_t session_id = 0;
  uint32_t key_epoch = 0;
  std::map<std::string, uint64_t> serialized_sizes;
  std::vector<uint8_t> secret;  // backend-private material; empty for reference
};

namespace detail {

/// Shared epoch authority for one session. Handles point at it so staleness
/// checks are a single atomic load.
struct SessionCtl {
  uint64_t session_id = 0;
  std::atomic<uint32_t> epoch{0};
};

struct Payload {
  int64_t scalar = 0;
  std::vector<int64_t> slots;  // used iff vector-shaped
};

struct BackendAccess;  // grants backends payload access

}  // namespace detail

/// Opaque reference to a backend-resident integer value, scalar or vector.
/// Handles are immutable and cheap to copy; combining two handles requires
/// equal width and session.
class ObliviousHandle {
public:
  ObliviousHandle() = default;

  uint64_t id() const { return id_; }
  int width() const { return width_; }
  uint64_t session_id() const { return session_id_; }
  uint32_t epoch() const { return epoch_; }
  bool is_vector() const { return slot_ == kWholeVector && payload_ && !payload_->slots.empty(); }
  size_t length() const { return is_vector() ? payload_->slots.size() : 1; }
  bool valid() const { return payload_ != nullptr; }

private:
  friend struct detail::BackendAccess;
  static constexpr uint32_t kWholeVector = 0xffffffffu;

  uint64_t id_ = 0;
  int width_ = 0;
  uint64_t session_id_ = 0;
  uint32_t epoch_ = 0;
  uint32_t slot_ = kWholeVector;  // index into payload->slots for slot views
  std::shared_ptr<const detail::Payload> payload_;
  std::shared_ptr<detail::SessionCtl> ctl_;
};

/// An encrypted bit; decrypts to exactly 0 or 1.
class ObliviousBit {
public:
  ObliviousBit() = default;

  uint64_t id() const { return id_; }
  uint64_t session_id() const { return session_id_; }
  uint32_t epoch() const { return epoch_; }
  bool valid() const { return ctl_ != nullptr; }

private:
  friend struct detail::BackendAccess;

  uint64_t id_ = 0;
  uint64_t session_id_ = 0;
  uint32_t epoch_ = 0;
  int64_t value_ = 0;
  std::shared_ptr<detail::SessionCtl> ctl_;
};

enum class GateKind : uint8_t {
  add = 1,
  sub,
  mul,
  mul_plain,
  add_plain,
  shift_right,
  xor_word,
  and_word,
  mask_from_bit,
  cmp_gt_plain,
  cmp_gt_ct,
  bit_and,
  bit_or,
  bit_xor,
  bit_not,
};

const char* gate_name(GateKind k);

struct GateRecord {
  GateKind kind;
  uint8_t arity;
  uint8_t width;

  friend bool operator==(const GateRecord&, const GateRecord&) = default;
};

/// Ordered gate log of a program run. Content depends only on input shapes
/// and the program, never on input values — that is the obliviousness
/// property the trace backend exists to check.
struct CircuitTrace {
  std::vector<GateRecord> records;

  std::vector<uint8_t> bytes() const;

  friend bool operator==(const CircuitTrace&, const CircuitTrace&) = default;
};

/// Abstract evaluation backend. The gate set has exact two's-complement
/// semantics at the handle width; the reference implementation doubles as
/// the conformance oracle for any external adapter.
///
/// Concurrency: handles are immutable; gate ops are pure and may run from
/// any number of threads. rotate_keys requires exclusive use of the session.
class Backend {
public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;

  // --- session lifecycle -------------------------------------------------
  virtual SessionKeys keygen(const KeygenParams& params) = 0;
  virtual SessionKeys rotate_keys(const SessionKeys& keys) = 0;

  /// Re-registers a session from persisted keys (client restarts between
  /// pipeline stages).
  virtual void restore_session(const SessionKeys& keys) = 0;

  // --- data movement -----------------------------------------------------
  virtual ObliviousHandle encrypt_raw(std::span<const int64_t> values, int width,
                                      const SessionKeys& keys) = 0;
  virtual std::vector<int64_t> decrypt_raw(const ObliviousHandle& h,
                                           const SessionKeys& keys) = 0;
  virtual int decrypt_bit(const ObliviousBit& b, const SessionKeys& keys) = 0;

  ObliviousHandle encrypt(const EncodedValue& v, const FixedPointConfig& cfg,
                          const SessionKeys& keys);
  ObliviousHandle encrypt(std::span<const EncodedValue> vs,
                          const FixedPointConfig& cfg, const SessionKeys& keys);

  /// Scalar view of one element of a vector handle. Structural only: no
  /// gate is evaluated and no trace record is emitted.
  virtual ObliviousHandle slot(const ObliviousHandle& vec, size_t index) = 0;

  // --- gate set ------------------------------------------------------------
  virtual ObliviousHandle add(const ObliviousHandle& a, const ObliviousHandle& b) = 0;
  virtual ObliviousHandle sub(const ObliviousHandle& a, const ObliviousHandle& b) = 0;
  virtual ObliviousHandle mul(const ObliviousHandle& a, const ObliviousHandle& b) = 0;
  virtual ObliviousHandle mul_plain(const ObliviousHandle& a, int64_t k) = 0;
  virtual ObliviousHandle add_plain(const ObliviousHandle& a, int64_t k) = 0;
  virtual ObliviousHandle shift_right(const ObliviousHandle& a, int bits) = 0;
  virtual ObliviousHandle xor_word(const ObliviousHandle& a, const ObliviousHandle& b) = 0;
  virtual ObliviousHandle and_word(const ObliviousHandle& a, const ObliviousHandle& b) = 0;
  virtual ObliviousHandle mask_from_bit(const ObliviousBit& b, int width) = 0;
  virtual ObliviousBit cmp_gt(const ObliviousHandle& a, int64_t threshold) = 0;
  virtual ObliviousBit cmp_gt_ct(const ObliviousHandle& a, const ObliviousHandle& b) = 0;
  virtual ObliviousBit bit_and(const ObliviousBit& a, const ObliviousBit& b) = 0;
  virtual ObliviousBit bit_or(const ObliviousBit& a, const ObliviousBit& b) = 0;
  virtual ObliviousBit bit_xor(const ObliviousBit& a, const ObliviousBit& b) = 0;
  virtual ObliviousBit bit_not(const ObliviousBit& a) = 0;

  // --- adapter serialization contract -------------------------------------
  // Length-prefixed byte blobs; the only boundary an external library plugs
  // into besides the gate set above.
  virtual std::vector<uint8_t> serialize_handle(const ObliviousHandle& h) = 0;
  virtual ObliviousHandle deserialize_handle(std::span<const uint8_t> blob,
                                             uint64_t session_id) = 0;
  virtual std::vector<uint8_t> serialize_bit(const ObliviousBit& b) = 0;
  virtual ObliviousBit deserialize_bit(std::span<const uint8_t> blob,
                                       uint64_t session_id) = 0;

  /// Key/context artifacts to upload, keyed by phase name ("context",
  /// "public-key", "eval-keys").
  virtual std::map<std::string, std::vector<uint8_t>> export_artifacts(
      const SessionKeys& keys) = 0;

  /// Server-side import: registers the session at the given epoch.
  virtual void import_artifacts(
      uint64_t session_id, uint32_t epoch,
      const std::map<std::string, std::vector<uint8_t>>& artifacts) = 0;

  /// Server-side epoch bump driven by a ROTATE message.
  virtual void advance_epoch(uint64_t session_id, uint32_t new_epoch) = 0;

  /// Current epoch of a registered session (unknown_session if absent).
  virtual uint32_t session_epoch(uint64_t session_id) const = 0;
};

/// Branchless multiplexer: decrypts to a when b = 1, else c. Composed from
/// word gates as c ^ (mask(b) & (a ^ c)), so it emits exactly four records.
ObliviousHandle select(Backend& be, const ObliviousBit& b,
                       const ObliviousHandle& a, const ObliviousHandle& c);

/// Factory for the built-in backends: "reference", "trace", "external".
/// "external" throws backend_unavailable unless an adapter was compiled in.
std::unique_ptr<Backend> make_backend(const std::string& name);

}  // namespace obliqc
