// SPDX-License-Identifier: Apache-2.0
#include "obliqc/trace_backend.hpp"

namespace obliqc {

TraceBackend::TraceBackend(std::unique_ptr<Backend> inner)
    : inner_(inner ? std::move(inner) : std::make_unique<ReferenceBackend>()) {
  desc_ = inner_->descriptor();
  desc_.name = "trace:" + desc_.name;
  desc_.kind = BackendKind::circuit_trace;
}

CircuitTrace TraceBackend::trace() const {
  std::lock_guard lk(mu_);
  return trace_;
}

void TraceBackend::clear_trace() {
  std::lock_guard lk(mu_);
  trace_.records.clear();
  depths_.clear();
  max_depth_ = 0;
}

size_t TraceBackend::max_depth() const {
  std::lock_guard lk(mu_);
  return max_depth_;
}

size_t TraceBackend::depth_of(uint64_t id) const {
  auto it = depths_.find(id);
  return it == depths_.end() ? 0 : it->second;
}

void TraceBackend::record(GateKind kind, uint8_t arity, int width,
                          uint64_t out_id, size_t in_depth) {
  std::lock_guard lk(mu_);
  trace_.records.push_back({kind, arity, uint8_t(width)});
  const size_t d = in_depth + 1;
  depths_[out_id] = d;
  if (d > max_depth_) max_depth_ = d;
}

SessionKeys TraceBackend::keygen(const KeygenParams& p) { return inner_->keygen(p); }
SessionKeys TraceBackend::rotate_keys(const SessionKeys& k) { return inner_->rotate_keys(k); }
void TraceBackend::restore_session(const SessionKeys& k) { inner_->restore_session(k); }

ObliviousHandle TraceBackend::encrypt_raw(std::span<const int64_t> values,
                                          int width, const SessionKeys& keys) {
  return inner_->encrypt_raw(values, width, keys);
}

std::vector<int64_t> TraceBackend::decrypt_raw(const ObliviousHandle& h,
                                               const SessionKeys& keys) {
  return inner_->decrypt_raw(h, keys);
}

int TraceBackend::decrypt_bit(const ObliviousBit& b, const SessionKeys& keys) {
  return inner_->decrypt_bit(b, keys);
}

ObliviousHandle TraceBackend::slot(const ObliviousHandle& vec, size_t index) {
  return inner_->slot(vec, index);
}

ObliviousHandle TraceBackend::add(const ObliviousHandle& a, const ObliviousHandle& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->add(a, b);
  record(GateKind::add, 2, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::sub(const ObliviousHandle& a, const ObliviousHandle& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->sub(a, b);
  record(GateKind::sub, 2, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::mul(const ObliviousHandle& a, const ObliviousHandle& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->mul(a, b);
  record(GateKind::mul, 2, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::mul_plain(const ObliviousHandle& a, int64_t k) {
  size_t d = depth_of(a.id());
  auto r = inner_->mul_plain(a, k);
  record(GateKind::mul_plain, 1, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::add_plain(const ObliviousHandle& a, int64_t k) {
  size_t d = depth_of(a.id());
  auto r = inner_->add_plain(a, k);
  record(GateKind::add_plain, 1, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::shift_right(const ObliviousHandle& a, int bits) {
  size_t d = depth_of(a.id());
  auto r = inner_->shift_right(a, bits);
  record(GateKind::shift_right, 1, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::xor_word(const ObliviousHandle& a,
                                       const ObliviousHandle& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->xor_word(a, b);
  record(GateKind::xor_word, 2, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::and_word(const ObliviousHandle& a,
                                       const ObliviousHandle& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->and_word(a, b);
  record(GateKind::and_word, 2, a.width(), r.id(), d);
  return r;
}

ObliviousHandle TraceBackend::mask_from_bit(const ObliviousBit& b, int width) {
  size_t d = depth_of(b.id());
  auto r = inner_->mask_from_bit(b, width);
  record(GateKind::mask_from_bit, 1, width, r.id(), d);
  return r;
}

ObliviousBit TraceBackend::cmp_gt(const ObliviousHandle& a, int64_t threshold) {
  size_t d = depth_of(a.id());
  auto r = inner_->cmp_gt(a, threshold);
  record(GateKind::cmp_gt_plain, 1, a.width(), r.id(), d);
  return r;
}

ObliviousBit TraceBackend::cmp_gt_ct(const ObliviousHandle& a,
                                     const ObliviousHandle& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->cmp_gt_ct(a, b);
  record(GateKind::cmp_gt_ct, 2, a.width(), r.id(), d);
  return r;
}

ObliviousBit TraceBackend::bit_and(const ObliviousBit& a, const ObliviousBit& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->bit_and(a, b);
  record(GateKind::bit_and, 2, 1, r.id(), d);
  return r;
}

ObliviousBit TraceBackend::bit_or(const ObliviousBit& a, const ObliviousBit& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->bit_or(a, b);
  record(GateKind::bit_or, 2, 1, r.id(), d);
  return r;
}

ObliviousBit TraceBackend::bit_xor(const ObliviousBit& a, const ObliviousBit& b) {
  size_t d = std::max(depth_of(a.id()), depth_of(b.id()));
  auto r = inner_->bit_xor(a, b);
  record(GateKind::bit_xor, 2, 1, r.id(), d);
  return r;
}

ObliviousBit TraceBackend::bit_not(const ObliviousBit& a) {
  size_t d = depth_of(a.id());
  auto r = inner_->bit_not(a);
  record(GateKind::bit_not, 1, 1, r.id(), d);
  return r;
}

std::vector<uint8_t> TraceBackend::serialize_handle(const ObliviousHandle& h) {
  return inner_->serialize_handle(h);
}

ObliviousHandle TraceBackend::deserialize_handle(std::span<const uint8_t> blob,
                                                 uint64_t session_id) {
  return inner_->deserialize_handle(blob, session_id);
}

std::vector<uint8_t> TraceBackend::serialize_bit(const ObliviousBit& b) {
  return inner_->serialize_bit(b);
}

ObliviousBit TraceBackend::deserialize_bit(std::span<const uint8_t> blob,
                                           uint64_t session_id) {
  return inner_->deserialize_bit(blob, session_id);
}

std::map<std::string, std::vector<uint8_t>> TraceBackend::export_artifacts(
    const SessionKeys& keys) {
  return inner_->export_artifacts(keys);
}

void TraceBackend::import_artifacts(
    uint64_t session_id, uint32_t epoch,
    const std::map<std::string, std::vector<uint8_t>>& artifacts) {
  inner_->import_artifacts(session_id, epoch, artifacts);
}

void TraceBackend::advance_epoch(uint64_t session_id, uint32_t new_epoch) {
  inner_->advance_epoch(session_id, new_epoch);
}

uint32_t TraceBackend::session_epoch(uint64_t session_id) const {
  return inner_->session_epoch(session_id);
}

CircuitTrace trace_program(
    const std::function<void(Backend&, std::span<const ObliviousHandle>,
                             const SessionKeys&)>& program,
    std::span<const std::vector<int64_t>> inputs, int width) {
  TraceBackend be;
  SessionKeys keys = be.keygen({.width = width});
  std::vector<ObliviousHandle> handles;
  handles.reserve(inputs.size());
  for (const auto& in : inputs) handles.push_back(be.encrypt_raw(in, width, keys));
  program(be, handles, keys);
  return be.trace();
}

std::unique_ptr<Backend> make_backend(const std::string& name) {
  if (name == "reference") return std::make_unique<ReferenceBackend>();
  if (name == "trace") return std::make_unique<TraceBackend>();
  if (name == "external")
    fail(Errc::backend_unavailable,
         "no external FHE adapter is compiled into this build");
  fail(Errc::config_error, "unknown backend '" + name + "'");
}

}  // namespace obliqc
