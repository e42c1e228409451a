// SPDX-License-Identifier: Apache-2.0
#include "obliqc/kernels.hpp"

#include <omp.h>

#include <vector>

namespace obliqc::kernels {

ObliviousHandle abs_branchless(Backend& be, const ObliviousHandle& h) {
  ObliviousHandle m = be.shift_right(h, h.width() - 1);
  ObliviousHandle t = be.add(h, m);
  return be.xor_word(t, m);
}

ObliviousHandle abs_select(Backend& be, const ObliviousHandle& h) {
  // Single select over the negation. The select mask is the sign of h, so it
  // comes straight from a shift instead of a compare + mask pair: five
  // records (mul_plain, shift, xor, and, xor).
  ObliviousHandle neg = be.mul_plain(h, -1);
  ObliviousHandle m = be.shift_right(h, h.width() - 1);
  ObliviousHandle t = be.xor_word(neg, h);
  ObliviousHandle u = be.and_word(m, t);
  return be.xor_word(u, h);
}

ObliviousHandle abs_naive(Backend& be, const ObliviousHandle& h) {
  ObliviousHandle neg = be.mul_plain(h, -1);
  ObliviousBit is_neg = be.cmp_gt(neg, 0);
  return select(be, is_neg, neg, h);
}

ObliviousHandle max_ct(Backend& be, const ObliviousHandle& a, const ObliviousHandle& b) {
  return select(be, be.cmp_gt_ct(a, b), a, b);
}

ObliviousHandle min_ct(Backend& be, const ObliviousHandle& a, const ObliviousHandle& b) {
  return select(be, be.cmp_gt_ct(a, b), b, a);
}

namespace {

using Combine = ObliviousHandle (*)(Backend&, const ObliviousHandle&,
                                    const ObliviousHandle&);

// One level of the balanced fold: pairs (0,1), (2,3), ...; an odd trailing
// element passes through. Applying levels until one element remains yields
// the same parenthesization as the recursive balanced tree.
std::vector<ObliviousHandle> fold_level(Backend& be,
                                        std::span<const ObliviousHandle> in,
                                        Combine combine) {
  std::vector<ObliviousHandle> out((in.size() + 1) / 2);
  for (size_t i = 0; i + 1 < in.size(); i += 2)
    out[i / 2] = combine(be, in[i], in[i + 1]);
  if (in.size() % 2) out.back() = in.back();
  return out;
}

std::vector<ObliviousHandle> fold_level_parallel(Backend& be,
                                                 std::span<const ObliviousHandle> in,
                                                 Combine combine, int workers) {
  std::vector<ObliviousHandle> out((in.size() + 1) / 2);
  const int64_t pairs = int64_t(in.size() / 2);
#pragma omp parallel for num_threads(workers) schedule(static)
  for (int64_t p = 0; p < pairs; ++p)
    out[size_t(p)] = combine(be, in[size_t(2 * p)], in[size_t(2 * p + 1)]);
  if (in.size() % 2) out.back() = in.back();
  return out;
}

ObliviousHandle fold(Backend& be, std::span<const ObliviousHandle> hs,
                     Combine combine, int workers) {
  if (hs.empty()) fail(Errc::empty_vector, "fold over an empty vector");
  std::vector<ObliviousHandle> level(hs.begin(), hs.end());
  while (level.size() > 1) {
    level = workers > 1 ? fold_level_parallel(be, level, combine, workers)
                        : fold_level(be, level, combine);
  }
  return level.front();
}

ObliviousHandle add_combine(Backend& be, const ObliviousHandle& a,
                            const ObliviousHandle& b) {
  return be.add(a, b);
}

}  // namespace

ObliviousHandle min_vec(Backend& be, std::span<const ObliviousHandle> hs) {
  return fold(be, hs, &min_ct, 1);
}

ObliviousHandle max_vec(Backend& be, std::span<const ObliviousHandle> hs) {
  return fold(be, hs, &max_ct, 1);
}

ObliviousHandle sum_vec(Backend& be, std::span<const ObliviousHandle> hs) {
  return fold(be, hs, &add_combine, 1);
}

ObliviousHandle min_vec_parallel(Backend& be, std::span<const ObliviousHandle> hs,
                                 int workers) {
  return fold(be, hs, &min_ct, workers);
}

ObliviousHandle max_vec_parallel(Backend& be, std::span<const ObliviousHandle> hs,
                                 int workers) {
  return fold(be, hs, &max_ct, workers);
}

ObliviousHandle sum_vec_parallel(Backend& be, std::span<const ObliviousHandle> hs,
                                 int workers) {
  return fold(be, hs, &add_combine, workers);
}

ObliviousHandle ssd(Backend& be, std::span<const ObliviousHandle> hs, int64_t anchor) {
  if (hs.empty()) fail(Errc::empty_vector, "ssd over an empty vector");
  const int64_t n = int64_t(hs.size());
  std::vector<ObliviousHandle> devs;
  devs.reserve(hs.size());
  for (const auto& h : hs) devs.push_back(be.add_plain(h, -anchor));
  std::vector<ObliviousHandle> squares;
  squares.reserve(devs.size());
  for (const auto& d : devs) squares.push_back(be.mul(d, d));
  ObliviousHandle sum_sq = sum_vec(be, squares);
  ObliviousHandle sum_d = sum_vec(be, devs);
  ObliviousHandle n_sum_sq = be.mul_plain(sum_sq, n);
  ObliviousHandle sum_d_sq = be.mul(sum_d, sum_d);
  return be.sub(n_sum_sq, sum_d_sq);
}

ObliviousBit sd_exceeds(Backend& be, std::span<const ObliviousHandle> hs,
                        int64_t sigma_limit_raw, int64_t anchor) {
  const int64_t n = int64_t(hs.size());
  int64_t sigma_sq = 0, threshold = 0;
  if (__builtin_mul_overflow(sigma_limit_raw, sigma_limit_raw, &sigma_sq) ||
      __builtin_mul_overflow(n * (n - 1), sigma_sq, &threshold))
    fail(Errc::overflow, "sd threshold does not fit 64 bits");
  return be.cmp_gt(ssd(be, hs, anchor), threshold);
}

ObliviousBit any_of(Backend& be, std::span<const ObliviousBit> bits) {
  if (bits.empty()) fail(Errc::empty_vector, "any_of over an empty vector");
  std::vector<ObliviousBit> level(bits.begin(), bits.end());
  while (level.size() > 1) {
    std::vector<ObliviousBit> next((level.size() + 1) / 2);
    for (size_t i = 0; i + 1 < level.size(); i += 2)
      next[i / 2] = be.bit_or(level[i], level[i + 1]);
    if (level.size() % 2) next.back() = level.back();
    level = std::move(next);
  }
  return level.front();
}

}  // namespace obliqc::kernels
