// SPDX-License-Identifier: Apache-2.0
#include "obliqc/reference_backend.hpp"

#include <chrono>
#include <cstdlib>

#include "backend_access.hpp"

namespace obliqc {

using detail::BackendAccess;

namespace {

std::atomic<uint64_t> g_session_counter{1};

int64_t width_cap(int width) { return FixedPointConfig::width_max(width); }
int64_t width_floor(int width) { return FixedPointConfig::width_min(width); }

void check_width_value(int64_t v, int width, Errc code, const char* what) {
  if (v < width_floor(width) || v > width_cap(width))
    fail(code, std::string(what) + " does not fit width " + std::to_string(width), v);
}

void check_fresh(const std::shared_ptr<detail::SessionCtl>& c, uint32_t epoch) {
  if (c->epoch.load(std::memory_order_acquire) != epoch)
    fail(Errc::stale_key_epoch, "key epoch is stale");
}

void check_pair(const ObliviousHandle& a, const ObliviousHandle& b) {
  if (a.session_id() != b.session_id())
    fail(Errc::session_mismatch, "handles from different sessions");
  if (a.width() != b.width())
    fail(Errc::width_mismatch, "handles of different widths");
  if (a.epoch() != b.epoch())
    fail(Errc::stale_key_epoch, "handles from different key epochs");
  check_fresh(BackendAccess::ctl(a), a.epoch());
}

void check_one(const ObliviousHandle& a) {
  check_fresh(BackendAccess::ctl(a), a.epoch());
}

void check_bit_pair(const ObliviousBit& a, const ObliviousBit& b) {
  if (a.session_id() != b.session_id())
    fail(Errc::session_mismatch, "bits from different sessions");
  if (a.epoch() != b.epoch())
    fail(Errc::stale_key_epoch, "bits from different key epochs");
  check_fresh(BackendAccess::ctl(a), a.epoch());
}

}  // namespace

const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::add: return "add";
    case GateKind::sub: return "sub";
    case GateKind::mul: return "mul";
    case GateKind::mul_plain: return "mul_plain";
    case GateKind::add_plain: return "add_plain";
    case GateKind::shift_right: return "shift_right";
    case GateKind::xor_word: return "xor_word";
    case GateKind::and_word: return "and_word";
    case GateKind::mask_from_bit: return "mask_from_bit";
    case GateKind::cmp_gt_plain: return "cmp_gt_plain";
    case GateKind::cmp_gt_ct: return "cmp_gt_ct";
    case GateKind::bit_and: return "bit_and";
    case GateKind::bit_or: return "bit_or";
    case GateKind::bit_xor: return "bit_xor";
    case GateKind::bit_not: return "bit_not";
  }
  return "unknown";
}

std::vector<uint8_t> CircuitTrace::bytes() const {
  std::vector<uint8_t> out;
  out.reserve(4 + records.size() * 3);
  uint32_t n = static_cast<uint32_t>(records.size());
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(n >> (8 * i)));
  for (const auto& r : records) {
    out.push_back(uint8_t(r.kind));
    out.push_back(r.arity);
    out.push_back(r.width);
  }
  return out;
}

void BackendDescriptor::validate() const {
  if (kind == BackendKind::external_fhe && security_bits < 128)
    fail(Errc::config_error,
         "external backends must declare at least 128-bit security");
  if (max_width <= 0 || max_width > 64)
    fail(Errc::config_error, "unsupported max width");
}

ObliviousHandle Backend::encrypt(const EncodedValue& v,
                                 const FixedPointConfig& cfg,
                                 const SessionKeys& keys) {
  if (v.config_id != cfg.id())
    fail(Errc::config_mismatch, "encoded value belongs to a different config");
  int64_t raw = v.raw;
  return encrypt_raw(std::span<const int64_t>(&raw, 1), cfg.width, keys);
}

ObliviousHandle Backend::encrypt(std::span<const EncodedValue> vs,
                                 const FixedPointConfig& cfg,
                                 const SessionKeys& keys) {
  std::vector<int64_t> raw;
  raw.reserve(vs.size());
  for (const auto& v : vs) {
    if (v.config_id != cfg.id())
      fail(Errc::config_mismatch, "encoded value belongs to a different config");
    raw.push_back(v.raw);
  }
  return encrypt_raw(raw, cfg.width, keys);
}

ReferenceBackend::ReferenceBackend(SyntheticCost cost) : cost_(cost) {
  desc_.name = "reference";
  desc_.kind = BackendKind::reference_plaintext;
  desc_.security_bits = 0;
  desc_.supports_batching = true;
  desc_.max_width = 32;
}

void ReferenceBackend::burn(int gates) const {
  if (cost_.gate_cost.count() <= 0 || gates <= 0) return;
  const auto end = std::chrono::steady_clock::now() + cost_.gate_cost * gates;
  while (std::chrono::steady_clock::now() < end) {
    // spin; sleeping adds more jitter than the budget being modelled
  }
}

std::shared_ptr<detail::SessionCtl> ReferenceBackend::ctl(uint64_t session_id) const {
  std::lock_guard lk(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end())
    fail(Errc::unknown_session, "session " + std::to_string(session_id));
  return it->second;
}

std::shared_ptr<detail::SessionCtl> ReferenceBackend::ctl_or_create(
    uint64_t session_id, uint32_t epoch) {
  std::lock_guard lk(mu_);
  auto& slot = sessions_[session_id];
  if (!slot) {
    slot = std::make_shared<detail::SessionCtl>();
    slot->session_id = session_id;
    slot->epoch.store(epoch, std::memory_order_relaxed);
  }
  return slot;
}

SessionKeys ReferenceBackend::keygen(const KeygenParams& params) {
  if (params.width > desc_.max_width)
    fail(Errc::width_exceeded, "requested width exceeds backend maximum");
  burn(cost_.keygen_gates);
  SessionKeys keys;
  keys.session_id = g_session_counter.fetch_add(1, std::memory_order_relaxed);
  keys.key_epoch = 0;
  ctl_or_create(keys.session_id, 0);
  for (auto& [name, blob] : export_artifacts(keys))
    keys.serialized_sizes[name] = blob.size();
  return keys;
}

SessionKeys ReferenceBackend::rotate_keys(const SessionKeys& keys) {
  auto c = ctl(keys.session_id);
  uint32_t expected = keys.key_epoch;
  if (!c->epoch.compare_exchange_strong(expected, keys.key_epoch + 1,
                                        std::memory_order_acq_rel))
    fail(Errc::stale_key_epoch, "rotation attempted with stale keys");
  SessionKeys next = keys;
  next.key_epoch = keys.key_epoch + 1;
  next.serialized_sizes.clear();
  for (auto& [name, blob] : export_artifacts(next))
    next.serialized_sizes[name] = blob.size();
  return next;
}

void ReferenceBackend::restore_session(const SessionKeys& keys) {
  ctl_or_create(keys.session_id, keys.key_epoch);
}

ObliviousHandle ReferenceBackend::encrypt_raw(std::span<const int64_t> values,
                                              int width, const SessionKeys& keys) {
  if (width > desc_.max_width)
    fail(Errc::width_exceeded, "value width exceeds backend maximum");
  if (values.empty()) fail(Errc::empty_vector, "cannot encrypt an empty batch");
  auto c = ctl(keys.session_id);
  check_fresh(c, keys.key_epoch);
  for (int64_t v : values)
    check_width_value(v, width, Errc::width_exceeded, "plaintext value");
  burn(int(values.size()) * cost_.encrypt_gates_per_slot);
  if (values.size() == 1)
    return BackendAccess::make_scalar(values[0], width, std::move(c), keys.key_epoch);
  return BackendAccess::make_vector(std::vector<int64_t>(values.begin(), values.end()),
                                    width, std::move(c), keys.key_epoch);
}

std::vector<int64_t> ReferenceBackend::decrypt_raw(const ObliviousHandle& h,
                                                   const SessionKeys& keys) {
  if (h.session_id() != keys.session_id)
    fail(Errc::session_mismatch, "handle from a different session");
  if (h.epoch() != keys.key_epoch)
    fail(Errc::stale_key_epoch, "handle epoch does not match the keys");
  check_one(h);
  burn(int(h.length()) * cost_.decrypt_gates_per_slot);
  if (h.is_vector()) return BackendAccess::slots(h);
  return {BackendAccess::value(h)};
}

int ReferenceBackend::decrypt_bit(const ObliviousBit& b, const SessionKeys& keys) {
  if (b.session_id() != keys.session_id)
    fail(Errc::session_mismatch, "bit from a different session");
  if (b.epoch() != keys.key_epoch)
    fail(Errc::stale_key_epoch, "bit epoch does not match the keys");
  check_fresh(BackendAccess::ctl(b), b.epoch());
  burn(cost_.decrypt_gates_per_slot);
  return int(BackendAccess::bit_value(b));
}

ObliviousHandle ReferenceBackend::slot(const ObliviousHandle& vec, size_t index) {
  if (!vec.is_vector())
    fail(Errc::shape_mismatch, "slot() requires a vector handle");
  if (index >= vec.length())
    fail(Errc::shape_mismatch, "slot index out of range", int64_t(index));
  return BackendAccess::make_slot_view(vec, index);
}

ObliviousHandle ReferenceBackend::add(const ObliviousHandle& a,
                                      const ObliviousHandle& b) {
  check_pair(a, b);
  burn(1);
  int64_t r = BackendAccess::value(a) + BackendAccess::value(b);
  check_width_value(r, a.width(), Errc::overflow, "add result");
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::sub(const ObliviousHandle& a,
                                      const ObliviousHandle& b) {
  check_pair(a, b);
  burn(1);
  int64_t r = BackendAccess::value(a) - BackendAccess::value(b);
  check_width_value(r, a.width(), Errc::overflow, "sub result");
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::mul(const ObliviousHandle& a,
                                      const ObliviousHandle& b) {
  check_pair(a, b);
  burn(1);
  // Operands are bounded by the 32-bit cap, so the 64-bit product is exact.
  int64_t r = BackendAccess::value(a) * BackendAccess::value(b);
  check_width_value(r, a.width(), Errc::overflow, "mul result");
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::mul_plain(const ObliviousHandle& a, int64_t k) {
  check_one(a);
  burn(1);
  int64_t v = BackendAccess::value(a);
  int64_t r;
  if (__builtin_mul_overflow(v, k, &r))
    fail(Errc::overflow, "mul_plain result does not fit 64 bits");
  check_width_value(r, a.width(), Errc::overflow, "mul_plain result");
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::add_plain(const ObliviousHandle& a, int64_t k) {
  check_one(a);
  burn(1);
  int64_t r = BackendAccess::value(a) + k;
  check_width_value(r, a.width(), Errc::overflow, "add_plain result");
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::shift_right(const ObliviousHandle& a, int bits) {
  check_one(a);
  if (bits < 0 || bits >= a.width())
    fail(Errc::width_mismatch, "shift amount must be in [0, width)");
  burn(1);
  // Values are kept sign-extended in 64 bits, so a 64-bit arithmetic shift
  // matches the width-w arithmetic shift exactly.
  int64_t r = BackendAccess::value(a) >> bits;
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

namespace {

// Two's-complement word ops on sign-extended 64-bit carriers agree with the
// width-w ops bit for bit, including the sign extension of the result.
int64_t word_xor(int64_t a, int64_t b) { return a ^ b; }
int64_t word_and(int64_t a, int64_t b) { return a & b; }

}  // namespace

ObliviousHandle ReferenceBackend::xor_word(const ObliviousHandle& a,
                                           const ObliviousHandle& b) {
  check_pair(a, b);
  burn(1);
  int64_t r = word_xor(BackendAccess::value(a), BackendAccess::value(b));
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::and_word(const ObliviousHandle& a,
                                           const ObliviousHandle& b) {
  check_pair(a, b);
  burn(1);
  int64_t r = word_and(BackendAccess::value(a), BackendAccess::value(b));
  return BackendAccess::make_scalar(r, a.width(), BackendAccess::ctl(a), a.epoch());
}

ObliviousHandle ReferenceBackend::mask_from_bit(const ObliviousBit& b, int width) {
  check_fresh(BackendAccess::ctl(b), b.epoch());
  burn(1);
  int64_t r = -BackendAccess::bit_value(b);  // 0 or all-ones
  return BackendAccess::make_scalar(r, width, BackendAccess::ctl(b), b.epoch());
}

ObliviousBit ReferenceBackend::cmp_gt(const ObliviousHandle& a, int64_t threshold) {
  check_one(a);
  burn(1);
  int64_t r = BackendAccess::value(a) > threshold ? 1 : 0;
  return BackendAccess::make_bit(r, BackendAccess::ctl(a), a.epoch());
}

ObliviousBit ReferenceBackend::cmp_gt_ct(const ObliviousHandle& a,
                                         const ObliviousHandle& b) {
  check_pair(a, b);
  burn(1);
  int64_t r = BackendAccess::value(a) > BackendAccess::value(b) ? 1 : 0;
  return BackendAccess::make_bit(r, BackendAccess::ctl(a), a.epoch());
}

ObliviousBit ReferenceBackend::bit_and(const ObliviousBit& a, const ObliviousBit& b) {
  check_bit_pair(a, b);
  burn(1);
  return BackendAccess::make_bit(BackendAccess::bit_value(a) & BackendAccess::bit_value(b),
                                 BackendAccess::ctl(a), a.epoch());
}

ObliviousBit ReferenceBackend::bit_or(const ObliviousBit& a, const ObliviousBit& b) {
  check_bit_pair(a, b);
  burn(1);
  return BackendAccess::make_bit(BackendAccess::bit_value(a) | BackendAccess::bit_value(b),
                                 BackendAccess::ctl(a), a.epoch());
}

ObliviousBit ReferenceBackend::bit_xor(const ObliviousBit& a, const ObliviousBit& b) {
  check_bit_pair(a, b);
  burn(1);
  return BackendAccess::make_bit(BackendAccess::bit_value(a) ^ BackendAccess::bit_value(b),
                                 BackendAccess::ctl(a), a.epoch());
}

ObliviousBit ReferenceBackend::bit_not(const ObliviousBit& a) {
  check_fresh(BackendAccess::ctl(a), a.epoch());
  burn(1);
  return BackendAccess::make_bit(1 - BackendAccess::bit_value(a),
                                 BackendAccess::ctl(a), a.epoch());
}

namespace {

constexpr uint8_t kHandleTag = 0x01;
constexpr uint8_t kBitTag = 0x02;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

uint32_t get_u32(std::span<const uint8_t> b, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<uint8_t> ReferenceBackend::serialize_handle(const ObliviousHandle& h) {
  check_one(h);
  std::vector<uint8_t> out;
  const size_t n = h.length();
  const int bytes_per = h.width() / 8;
  out.reserve(19 + n * size_t(bytes_per));
  out.push_back(kHandleTag);
  out.push_back(uint8_t(h.width()));
  out.push_back(h.is_vector() ? 1 : 0);
  put_u32(out, h.epoch());
  put_u32(out, uint32_t(n));
  put_u64(out, 0);  // nonce slot; encrypting backends use it
  auto put_value = [&](int64_t v) {
    uint64_t u = uint64_t(v);
    for (int i = 0; i < bytes_per; ++i) out.push_back(uint8_t(u >> (8 * i)));
  };
  if (h.is_vector())
    for (int64_t v : BackendAccess::slots(h)) put_value(v);
  else
    put_value(BackendAccess::value(h));
  return out;
}

ObliviousHandle ReferenceBackend::deserialize_handle(std::span<const uint8_t> blob,
                                                     uint64_t session_id) {
  if (blob.size() < 19) fail(Errc::truncated_payload, "ciphertext blob too short");
  if (blob[0] != kHandleTag) fail(Errc::malformed_payload, "not a value ciphertext");
  const int width = blob[1];
  if (width != 16 && width != 32)
    fail(Errc::malformed_payload, "unsupported ciphertext width");
  const bool vec = blob[2] != 0;
  const uint32_t epoch = get_u32(blob, 3);
  const uint32_t n = get_u32(blob, 7);
  const int bytes_per = width / 8;
  if (blob.size() != 19 + size_t(n) * size_t(bytes_per))
    fail(Errc::truncated_payload, "ciphertext blob length mismatch");
  if (!vec && n != 1) fail(Errc::malformed_payload, "scalar blob with slot count");
  auto c = ctl_or_create(session_id, epoch);
  check_fresh(c, epoch);
  std::vector<int64_t> values;
  values.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint64_t u = 0;
    for (int j = 0; j < bytes_per; ++j)
      u |= uint64_t(blob[19 + size_t(i) * bytes_per + j]) << (8 * j);
    // sign-extend from width
    const uint64_t sign = uint64_t(1) << (width - 1);
    if (u & sign) u |= ~((sign << 1) - 1);
    values.push_back(int64_t(u));
  }
  if (!vec)
    return BackendAccess::make_scalar(values[0], width, std::move(c), epoch);
  return BackendAccess::make_vector(std::move(values), width, std::move(c), epoch);
}

std::vector<uint8_t> ReferenceBackend::serialize_bit(const ObliviousBit& b) {
  check_fresh(BackendAccess::ctl(b), b.epoch());
  std::vector<uint8_t> out;
  out.push_back(kBitTag);
  put_u32(out, b.epoch());
  put_u64(out, 0);
  out.push_back(uint8_t(BackendAccess::bit_value(b)));
  return out;
}

ObliviousBit ReferenceBackend::deserialize_bit(std::span<const uint8_t> blob,
                                               uint64_t session_id) {
  if (blob.size() != 14) fail(Errc::truncated_payload, "bit blob length mismatch");
  if (blob[0] != kBitTag) fail(Errc::malformed_payload, "not a bit ciphertext");
  const uint32_t epoch = get_u32(blob, 1);
  const uint8_t v = blob[13];
  if (v > 1) fail(Errc::malformed_payload, "bit ciphertext out of range");
  auto c = ctl_or_create(session_id, epoch);
  check_fresh(c, epoch);
  return BackendAccess::make_bit(v, std::move(c), epoch);
}

std::map<std::string, std::vector<uint8_t>> ReferenceBackend::export_artifacts(
    const SessionKeys&) {
  burn(cost_.context_gates);
  // Dummy but structured: the phases exist, their measured sizes are zero.
  return {{"context", {}}, {"public-key", {}}, {"eval-keys", {}}};
}

void ReferenceBackend::import_artifacts(
    uint64_t session_id, uint32_t epoch,
    const std::map<std::string, std::vector<uint8_t>>&) {
  ctl_or_create(session_id, epoch);
}

uint32_t ReferenceBackend::session_epoch(uint64_t session_id) const {
  return ctl(session_id)->epoch.load(std::memory_order_acquire);
}

void ReferenceBackend::advance_epoch(uint64_t session_id, uint32_t new_epoch) {
  auto c = ctl(session_id);
  uint32_t cur = c->epoch.load(std::memory_order_acquire);
  if (new_epoch <= cur)
    fail(Errc::stale_key_epoch, "epoch must advance monotonically");
  c->epoch.store(new_epoch, std::memory_order_release);
}

ObliviousHandle select(Backend& be, const ObliviousBit& b,
                       const ObliviousHandle& a, const ObliviousHandle& c) {
  ObliviousHandle m = be.mask_from_bit(b, a.width());
  ObliviousHandle t = be.xor_word(a, c);
  ObliviousHandle u = be.and_word(m, t);
  return be.xor_word(u, c);
}

}  // namespace obliqc
