// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "obliqc/backend.hpp"

namespace obliqc::kernels {

/// |x| via sign mask: m = x >> (w-1); |x| = (x + m) ^ m. Exactly three gate
/// records (shift, add, xor). Undefined for the most-negative width value,
/// which the codec range already excludes.
ObliviousHandle abs_branchless(Backend& be, const ObliviousHandle& h);

/// |x| as a single select over the negation (5 records).
ObliviousHandle abs_select(Backend& be, const ObliviousHandle& h);

/// |x| composed from public gates: select(0 - x > 0, 0 - x, x) (6 records).
ObliviousHandle abs_naive(Backend& be, const ObliviousHandle& h);

ObliviousHandle min_ct(Backend& be, const ObliviousHandle& a, const ObliviousHandle& b);
ObliviousHandle max_ct(Backend& be, const ObliviousHandle& a, const ObliviousHandle& b);

// Balanced-tree folds, depth ceil(log2 n). The tree shape is fixed by n, so
// results are bitwise identical no matter how the nodes are scheduled.
ObliviousHandle min_vec(Backend& be, std::span<const ObliviousHandle> hs);
ObliviousHandle max_vec(Backend& be, std::span<const ObliviousHandle> hs);
ObliviousHandle sum_vec(Backend& be, std::span<const ObliviousHandle> hs);

// Level-synchronous OpenMP variants of the folds above: tree levels are
// barriers, nodes within a level run concurrently. Same trees, same results.
ObliviousHandle min_vec_parallel(Backend& be, std::span<const ObliviousHandle> hs,
                                 int workers);
ObliviousHandle max_vec_parallel(Backend& be, std::span<const ObliviousHandle> hs,
                                 int workers);
ObliviousHandle sum_vec_parallel(Backend& be, std::span<const ObliviousHandle> hs,
                                 int workers);

/// Scaled sum of squared deviations: n * sum(x_i^2) - (sum x_i)^2, which is
/// scale^2 * n * sum((x - mean)^2) — an integer-exact, division-free,
/// sqrt-free dispersion statistic. `anchor` is a plaintext offset subtracted
/// from every input first; the statistic is translation-invariant, so the
/// value is unchanged while intermediate magnitudes shrink (pass the codec
/// range midpoint to halve the worst case).
ObliviousHandle ssd(Backend& be, std::span<const ObliviousHandle> hs,
                    int64_t anchor = 0);

/// [sample SD > sigma_limit] without division or square root: compares
/// ssd(hs) against n * (n-1) * sigma_limit_raw^2 where sigma_limit_raw is
/// the scaled integer form of the limit. Strict >.
ObliviousBit sd_exceeds(Backend& be, std::span<const ObliviousHandle> hs,
                        int64_t sigma_limit_raw, int64_t anchor = 0);

/// OR-fold over bits, balanced tree.
ObliviousBit any_of(Backend& be, std::span<const ObliviousBit> bits);

}  // namespace obliqc::kernels
