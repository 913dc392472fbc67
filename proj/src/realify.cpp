#include "a2r/realify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "a2r/error.hpp"

namespace a2r {

namespace {

struct Evaluation {
    double cx = 0.0;
    double anchor = 0.0;
    double total = 0.0;
    std::vector<double> gradient;
};

Evaluation evaluate(const Image& img, const Image& start, const BankStore& banks, const LabelMaskSet& masks,
                    const OptimizeConfig& cfg, const CxConfig& cx_cfg) {
    CxLossReport rep = cx_loss_gradient(img, banks, masks, cx_cfg);
    Evaluation e;
    e.cx = rep.total;
    e.gradient = std::move(rep.gradient);
    const double n = static_cast<double>(img.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double d = img.data[i] - start.data[i];
        sq += d * d;
        e.gradient[i] += cfg.content_weight * 2.0 * d / n;
    }
    e.anchor = cfg.content_weight * sq / n;
    e.total = e.cx + e.anchor;
    if (!std::isfinite(e.total))
        throw Error("non-finite loss during optimization (cx " + std::to_string(e.cx) + ", anchor " +
                    std::to_string(e.anchor) + ")");
    return e;
}

}  // namespace

RealifyResult realify(const Image& start, const BankStore& banks, const LabelMaskSet& masks,
                      const OptimizeConfig& cfg, const CxConfig& cx_cfg) {
    if (cfg.steps < 1) throw Error("steps must be >= 1");
    if (!(cfg.lr > 0.0)) throw Error("learning rate must be > 0");
    if (cfg.content_weight < 0.0) throw Error("content weight must be >= 0");
    if (cfg.patience < 1) throw Error("patience must be >= 1");
    if (!masks.empty() && (masks.width() != start.width || masks.height() != start.height))
        throw Error("mask dimensions do not match the start image");

    RealifyResult result{start, {}};
    Image x = start;
    std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int t = 0;; ++t) {
        Evaluation e = evaluate(x, start, banks, masks, cfg, cx_cfg);
        result.trace.steps.push_back({t, e.total, e.cx, e.anchor});
        if (e.total < best) {
            best = e.total;
            result.trace.best_step = t;
            result.image = x;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
        if (t == cfg.steps) break;

        const double b1t = 1.0 - std::pow(cfg.beta1, t + 1);
        const double b2t = 1.0 - std::pow(cfg.beta2, t + 1);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double g = e.gradient[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double step = cfg.lr * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + cfg.adam_eps);
            x.data[i] = std::clamp(x.data[i] - step, 0.0, 1.0);
        }
    }
    return result;
}

std::vector<ScaleDrift> nn_drift(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                                 const CxConfig& cx_cfg) {
    std::vector<ScaleDrift> out;
    for (const auto& scale : cx_cfg.scales) {
        const PatchSet ps = extract_patches(image, masks, scale, cx_cfg.coverage_threshold);
        std::map<ClassId, std::vector<double>> queries;
        for (std::size_t p = 0; p < ps.count(); ++p)
            for (ClassId c : ps.entries[p].classes) {
                const auto v = ps.vector(p);
                queries[c].insert(queries[c].end(), v.begin(), v.end());
            }
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& [c, q] : queries) {
            const IndexedBank& ib = banks.at(c, scale);
            for (const auto& nl : search(ib.index, ib.bank, q, SearchParams{1, cx_cfg.nprobe})) {
                sum += nl.front().distance;
                ++n;
            }
        }
        out.push_back({scale, n ? sum / static_cast<double>(n) : 0.0});
    }
    return out;
}

}  // namespace a2r
