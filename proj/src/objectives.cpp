#include "a2r/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "a2r/error.hpp"

namespace a2r::objectives {

namespace {

double mean_log(std::span<const double> p, bool complement) {
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error("discriminator output outside [0,1]");
        const double c = std::clamp(v, kProbabilityClamp, 1.0 - kProbabilityClamp);
        s += std::log(complement ? 1.0 - c : c);
    }
    return s / static_cast<double>(p.size());
}

double mean_abs_diff(const Image& a, const Image& b, CycleNorm norm) {
    if (a.width != b.width || a.height != b.height) throw Error("cycle loss: image shapes differ");
    if (a.data.empty()) throw Error("cycle loss: empty image");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += norm == CycleNorm::L1 ? std::abs(d) : d * d;
    }
    return s / static_cast<double>(a.data.size());
}

}  // namespace

double gan_loss(const DiscriminatorOutputs& d) {
    if (d.on_real.empty() || d.on_fake.empty()) throw Error("adversarial loss needs non-empty batches");
    return mean_log(d.on_real, false) + mean_log(d.on_fake, true);
}

double cycle_loss(const Image& x, const Image& recon_x, const Image& y, const Image& recon_y, CycleNorm norm) {
    return mean_abs_diff(x, recon_x, norm) + mean_abs_diff(y, recon_y, norm);
}

double full_loss(double cca, double cxms, const LossWeights& w) {
    if (!(w.lambda_cx >= 0.0)) throw Error("lambda must be >= 0");
    return cca + w.lambda_cx * cxms;
}

}  // namespace a2r::objectives
