// SPDX-License-Identifier: Apache-2.0
// Backend-private view of handle internals. Not installed; backends only.
#pragma once

#include <atomic>

#include "obliqc/backend.hpp"

namespace obliqc::detail {

inline std::atomic<uint64_t>& token_counter() {
  static std::atomic<uint64_t> c{1};
  return c;
}

struct BackendAccess {
  static ObliviousHandle make_scalar(int64_t value, int width,
                                     std::shared_ptr<SessionCtl> ctl,
                                     uint32_t epoch) {
    auto p = std::make_shared<Payload>();
    p->scalar = value;
    ObliviousHandle h;
    h.id_ = token_counter().fetch_add(1, std::memory_order_relaxed);
    h.width_ = width;
    h.session_id_ = ctl->session_id;
    h.epoch_ = epoch;
    h.slot_ = 0;
    h.payload_ = std::move(p);
    h.ctl_ = std::move(ctl);
    return h;
  }

  static ObliviousHandle make_vector(std::vector<int64_t> values, int width,
                                     std::shared_ptr<SessionCtl> ctl,
                                     uint32_t epoch) {
    auto p = std::make_shared<Payload>();
    p->slots = std::move(values);
    ObliviousHandle h;
    h.id_ = token_counter().fetch_add(1, std::memory_order_relaxed);
    h.width_ = width;
    h.session_id_ = ctl->session_id;
    h.epoch_ = epoch;
    h.slot_ = ObliviousHandle::kWholeVector;
    h.payload_ = std::move(p);
    h.ctl_ = std::move(ctl);
    return h;
  }

  static ObliviousHandle make_slot_view(const ObliviousHandle& vec, size_t index) {
    ObliviousHandle h = vec;
    h.id_ = token_counter().fetch_add(1, std::memory_order_relaxed);
    h.slot_ = static_cast<uint32_t>(index);
    return h;
  }

  static ObliviousBit make_bit(int64_t value, std::shared_ptr<SessionCtl> ctl,
                               uint32_t epoch) {
    ObliviousBit b;
    b.id_ = token_counter().fetch_add(1, std::memory_order_relaxed);
    b.session_id_ = ctl->session_id;
    b.epoch_ = epoch;
    b.value_ = value;
    b.ctl_ = std::move(ctl);
    return b;
  }

  static bool is_scalar_view(const ObliviousHandle& h) {
    return h.payload_->slots.empty() || h.slot_ != ObliviousHandle::kWholeVector;
  }

  static int64_t value(const ObliviousHandle& h) {
    const Payload& p = *h.payload_;
    if (p.slots.empty()) return p.scalar;
    if (h.slot_ == ObliviousHandle::kWholeVector)
      fail(Errc::shape_mismatch, "scalar gate applied to a vector handle");
    return p.slots[h.slot_];
  }

  static const std::vector<int64_t>& slots(const ObliviousHandle& h) {
    return h.payload_->slots;
  }

  static int64_t bit_value(const ObliviousBit& b) { return b.value_; }

  static const std::shared_ptr<SessionCtl>& ctl(const ObliviousHandle& h) {
    return h.ctl_;
  }
  static const std::shared_ptr<SessionCtl>& ctl(const ObliviousBit& b) {
    return b.ctl_;
  }
};

}  // namespace obliqc::detail
