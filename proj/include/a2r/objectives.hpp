#pragma once

#include <span>

#include "a2r/imaging.hpp"

namespace a2r::objectives {

inline constexpr double kProbabilityClamp = 1e-7;
inline constexpr double kDefaultLambda = 0.1;
inline constexpr int kMaskRefreshStart = 40;
inline constexpr int kMaskRefreshPeriod = 20;

// Discriminator probabilities on real and on translated samples.
struct DiscriminatorOutputs {
    std::span<const double> on_real;
    std::span<const double> on_fake;
};

struct LossWeights {
    double lambda_cx = kDefaultLambda;
};

enum class CycleNorm { L1, L2 };

// mean log D(real) + mean log(1 - D(fake)); probabilities clamped to
// [1e-7, 1 - 1e-7].
double gan_loss(const DiscriminatorOutputs& d);

// Per-element mean |x - F(G(x))| plus the same for y (squared error for L2).
double cycle_loss(const Image& x, const Image& recon_x, const Image& y, const Image& recon_y,
                  CycleNorm norm = CycleNorm::L1);

inline double cca_loss(double gan_xy, double gan_yx, double cyc) { return gan_xy + gan_yx + cyc; }

double full_loss(double cca, double cxms, const LossWeights& w = {});

// True on epoch 40 and every 20 epochs after.
constexpr bool mask_refresh_due(int epoch) {
    return epoch >= kMaskRefreshStart && (epoch - kMaskRefreshStart) % kMaskRefreshPeriod == 0;
}

}  // namespace a2r::objectives
