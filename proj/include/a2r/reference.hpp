#pragma once

// Serial, straightforward implementations of the parallel kernels. They share
// no code with the optimized paths and serve as test oracles, as the CLI
// `--exact` modes, and as the baseline in the benchmark.

#include <span>
#include <vector>

#include "a2r/ann.hpp"
#include "a2r/bank_store.hpp"
#include "a2r/cxloss.hpp"

namespace a2r::reference {

// Direct per-pixel counting, no summed-area tables.
PatchSet extract_patches(const Image& img, const LabelMaskSet& masks, const ScaleSpec& scale,
                         double coverage_threshold = kDefaultCoverage);

// Exhaustive scan of every bank vector.
std::vector<NeighborList> brute_force_knn(const MemoryBank& bank, std::span<const double> queries, int k);

// Dense affinity matrices against whole banks (no index).
CxLossReport dense_cx_loss(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                           const CxConfig& cfg);

}  // namespace a2r::reference
