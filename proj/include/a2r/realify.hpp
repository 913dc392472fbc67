#pragma once

#include <cstdint>
#include <vector>

#include "a2r/bank_store.hpp"
#include "a2r/cxloss.hpp"
#include "a2r/imaging.hpp"

namespace a2r {

struct OptimizeConfig {
    int steps = 500;
    double lr = 0.0002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    // Weight of mean((image - start)^2).
    double content_weight = 0.01;
    // Stop once the best loss has not improved for this many evaluations.
    int patience = 30;
    std::uint64_t seed = 0;
};

struct TraceStep {
    int step = 0;
    double total = 0.0;
    double cx = 0.0;
    double anchor = 0.0;
};

struct OptimizeTrace {
    std::vector<TraceStep> steps;
    int best_step = 0;

    const TraceStep& best() const { return steps[best_step]; }
};

struct RealifyResult {
    Image image;  // best-so-far
    OptimizeTrace trace;
};

// Adam on pixel values minimizing the multi-scale contextual loss plus a
// content anchor; pixels are clamped to [0,1] after every update.
RealifyResult realify(const Image& start, const BankStore& banks, const LabelMaskSet& masks,
                      const OptimizeConfig& cfg, const CxConfig& cx_cfg);

struct ScaleDrift {
    ScaleSpec scale;
    double mean_distance = 0.0;
};

// Per scale, mean exact distance from each (patch, class) to its retrieved
// nearest bank neighbor.
std::vector<ScaleDrift> nn_drift(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                                 const CxConfig& cx_cfg);

}  // namespace a2r
