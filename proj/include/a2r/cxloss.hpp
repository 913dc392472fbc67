#pragma once

#include <map>
#include <span>
#include <vector>

#include "a2r/bank_store.hpp"
#include "a2r/distance.hpp"
#include "a2r/imaging.hpp"

namespace a2r {

inline constexpr double kDistanceEpsilon = 1e-5;
inline constexpr double kDefaultBandwidth = 0.5;

// d / (min(row) + eps). Row must be nonempty and nonnegative.
std::vector<double> normalize_distances(std::span<const double> row, double eps = kDistanceEpsilon);

// Row softmax of (1 - d~) / h, evaluated with max subtraction.
std::vector<double> affinities(std::span<const double> normalized, double h = kDefaultBandwidth);

// One generated patch against its candidate bank patches.
struct AffinityRow {
    std::size_t patch = 0;  // index into the scale's PatchSet
    std::vector<std::uint32_t> ids;
    std::vector<double> distances;
    std::vector<double> normalized;
    std::vector<double> affinity;
    std::size_t argmin = 0;  // position within the row
    std::size_t argmax = 0;

    double max_affinity() const { return affinity[argmax]; }
};

using AffinityRows = std::vector<AffinityRow>;

// Builds a row from ascending candidates.
AffinityRow make_row(std::size_t patch, std::span<const Neighbor> candidates, double h,
                     double eps = kDistanceEpsilon);

// -log(mean over rows of the row max affinity).
double class_cx_loss(std::span<const double> row_maxes);
double class_cx_loss(const AffinityRows& rows);

// Sum of class losses; classes with no rows contribute nothing.
double image_cx_loss(const std::map<ClassId, AffinityRows>& per_class);

struct CxConfig {
    std::vector<ScaleSpec> scales = default_scales();
    double h = kDefaultBandwidth;
    int k = 5;
    int nprobe = 0;  // 0: index default; kProbeAll: every list
    double coverage_threshold = kDefaultCoverage;
    double epsilon = kDistanceEpsilon;
    // Treat min_l d_il in the normalization as a constant.
    bool stop_grad_min = false;
};

struct ClassLoss {
    ScaleSpec scale;
    ClassId class_id = 0;
    double loss = 0.0;
    std::size_t patches = 0;  // N_K^c
};

struct ScaleLoss {
    ScaleSpec scale;
    double loss = 0.0;
};

struct ClassRows {
    ScaleSpec scale;
    ClassId class_id = 0;
    AffinityRows rows;
};

struct CxLossReport {
    std::vector<ClassLoss> classes;  // scale order, then ascending class
    std::vector<ScaleLoss> scales;
    double total = 0.0;
    std::vector<double> gradient;  // shaped like Image::data when requested
    std::vector<ClassRows> rows;   // when requested
};

struct CxRequest {
    bool gradient = false;
    bool keep_rows = false;
};

// Multi-scale semantically partitioned contextual loss with sparse
// candidates from the ANN indices; optionally its gradient with respect to
// the image pixels (candidate sets held fixed).
CxLossReport evaluate_cx(const Image& image, const BankStore& banks, const LabelMaskSet& masks, const CxConfig& cfg,
                         CxRequest request = {});

CxLossReport multiscale_cx_loss(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                                const CxConfig& cfg);
CxLossReport cx_loss_gradient(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                              const CxConfig& cfg);

}  // namespace a2r
