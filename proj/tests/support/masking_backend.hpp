// SPDX-License-Identifier: Apache-2.0
// Encrypting-capable test double: arithmetic identical to the reference
// backend, but serialized blobs are masked with a keyed stream and a fresh
// nonce per blob, so no plaintext byte survives on the wire. The mask seed
// travels as the "eval-keys" artifact, mimicking the real upload flow.
// A toy, not a cipher; it exists so leak scans have an encrypting backend
// to run against without any FHE library present.
#pragma once

#include <mutex>
#include <unordered_map>

#include "obliqc/reference_backend.hpp"

namespace testsupport {

class MaskingBackend : public obliqc::ReferenceBackend {
public:
  MaskingBackend() {
    desc_.name = "masking-double";
    desc_.supports_batching = true;
  }

  obliqc::SessionKeys keygen(const obliqc::KeygenParams& params) override {
    obliqc::SessionKeys keys = ReferenceBackend::keygen(params);
    keys.secret = seed_bytes(ensure_seed(keys.session_id));
    keys.serialized_sizes.clear();
    for (auto& [name, blob] : export_artifacts(keys))
      keys.serialized_sizes[name] = blob.size();
    return keys;
  }

  obliqc::SessionKeys rotate_keys(const obliqc::SessionKeys& keys) override {
    obliqc::SessionKeys next = ReferenceBackend::rotate_keys(keys);
    const uint64_t seed = mix(seed_of(keys.session_id) ^ (next.key_epoch * 0x9e37ULL));
    set_seed(next.session_id, seed);
    next.secret = seed_bytes(seed);
    next.serialized_sizes.clear();
    for (auto& [name, blob] : export_artifacts(next))
      next.serialized_sizes[name] = blob.size();
    return next;
  }

  void restore_session(const obliqc::SessionKeys& keys) override {
    ReferenceBackend::restore_session(keys);
    if (keys.secret.size() == 8) set_seed(keys.session_id, seed_from(keys.secret));
  }

  std::map<std::string, std::vector<uint8_t>> export_artifacts(
      const obliqc::SessionKeys& keys) override {
    const uint64_t seed =
        keys.secret.size() == 8 ? seed_from(keys.secret) : ensure_seed(keys.session_id);
    std::map<std::string, std::vector<uint8_t>> out;
    out["context"] = pattern_blob(seed ^ 1, 64);
    out["public-key"] = pattern_blob(seed ^ 2, 1024);
    out["eval-keys"] = seed_bytes(seed);
    return out;
  }

  void import_artifacts(
      uint64_t session_id, uint32_t epoch,
      const std::map<std::string, std::vector<uint8_t>>& artifacts) override {
    ReferenceBackend::import_artifacts(session_id, epoch, artifacts);
    auto it = artifacts.find("eval-keys");
    if (it != artifacts.end() && it->second.size() == 8)
      set_seed(session_id, seed_from(it->second));
  }

  std::vector<uint8_t> serialize_handle(const obliqc::ObliviousHandle& h) override {
    auto blob = ReferenceBackend::serialize_handle(h);
    mask_blob(blob, 11, 19, seed_of(h.session_id()));
    return blob;
  }

  obliqc::ObliviousHandle deserialize_handle(std::span<const uint8_t> blob,
                                             uint64_t session_id) override {
    std::vector<uint8_t> plain(blob.begin(), blob.end());
    unmask_blob(plain, 11, 19, seed_of(session_id));
    return ReferenceBackend::deserialize_handle(plain, session_id);
  }

  std::vector<uint8_t> serialize_bit(const obliqc::ObliviousBit& b) override {
    auto blob = ReferenceBackend::serialize_bit(b);
    mask_blob(blob, 5, 13, seed_of(b.session_id()));
    return blob;
  }

  obliqc::ObliviousBit deserialize_bit(std::span<const uint8_t> blob,
                                       uint64_t session_id) override {
    std::vector<uint8_t> plain(blob.begin(), blob.end());
    unmask_blob(plain, 5, 13, seed_of(session_id));
    return ReferenceBackend::deserialize_bit(plain, session_id);
  }

private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::vector<uint8_t> seed_bytes(uint64_t seed) {
    std::vector<uint8_t> out(8);
    for (int i = 0; i < 8; ++i) out[size_t(i)] = uint8_t(seed >> (8 * i));
    return out;
  }

  static uint64_t seed_from(std::span<const uint8_t> b) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[size_t(i)]) << (8 * i);
    return v;
  }

  static std::vector<uint8_t> pattern_blob(uint64_t seed, size_t n) {
    std::vector<uint8_t> out(n);
    uint64_t s = seed;
    for (auto& v : out) {
      s = mix(s);
      v = uint8_t(s);
    }
    return out;
  }

  uint64_t seed_of(uint64_t session_id) const {
    std::lock_guard lk(seed_mu_);
    auto it = seeds_.find(session_id);
    if (it == seeds_.end())
      obliqc::fail(obliqc::Errc::unknown_session,
                   "no mask seed for session " + std::to_string(session_id));
    return it->second;
  }

  uint64_t ensure_seed(uint64_t session_id) {
    std::lock_guard lk(seed_mu_);
    auto [it, inserted] =
        seeds_.try_emplace(session_id, mix(0x6d61736b6f626c71ULL ^ session_id));
    return it->second;
  }

  void set_seed(uint64_t session_id, uint64_t seed) {
    std::lock_guard lk(seed_mu_);
    seeds_[session_id] = seed;
  }

  // nonce lives at [nonce_off, payload_off); payload is XOR-masked with the
  // keystream of (seed, nonce)
  void mask_blob(std::vector<uint8_t>& blob, size_t nonce_off, size_t payload_off,
                 uint64_t seed) {
    const uint64_t nonce = mix(nonce_counter_.fetch_add(1) ^ seed ^ 0xabcdefULL);
    for (int i = 0; i < 8; ++i)
      blob[nonce_off + size_t(i)] = uint8_t(nonce >> (8 * i));
    apply_stream(blob, payload_off, seed, nonce);
  }

  void unmask_blob(std::vector<uint8_t>& blob, size_t nonce_off, size_t payload_off,
                   uint64_t seed) const {
    if (blob.size() < payload_off) return;  // let the reference parser reject it
    uint64_t nonce = 0;
    for (int i = 0; i < 8; ++i)
      nonce |= uint64_t(blob[nonce_off + size_t(i)]) << (8 * i);
    apply_stream(blob, payload_off, seed, nonce);
  }

  static void apply_stream(std::vector<uint8_t>& blob, size_t from, uint64_t seed,
                           uint64_t nonce) {
    uint64_t s = seed ^ mix(nonce);
    size_t i = from;
    while (i < blob.size()) {
      s = mix(s);
      for (int b = 0; b < 8 && i < blob.size(); ++b, ++i)
        blob[i] ^= uint8_t(s >> (8 * b));
    }
  }

  mutable std::mutex seed_mu_;
  std::unordered_map<uint64_t, uint64_t> seeds_;
  std::atomic<uint64_t> nonce_counter_{1};
};

}  // namespace testsupport
