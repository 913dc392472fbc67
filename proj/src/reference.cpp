#include "a2r/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "a2r/error.hpp"

namespace a2r::reference {

PatchSet extract_patches(const Image& img, const LabelMaskSet& masks, const ScaleSpec& scale,
                         double coverage_threshold) {
    validate_scale(scale, img.width, img.height);
    PatchSet ps;
    ps.scale = scale;
    ps.dim = scale.dim();
    const int p = scale.patch_size;
    for (int y = 0; y + p <= img.height; y += scale.stride) {
        ++ps.grid_h;
        ps.grid_w = 0;
        for (int x = 0; x + p <= img.width; x += scale.stride) {
            ++ps.grid_w;
            PatchEntry e{x, y, {}};
            for (int dy = 0; dy < p; ++dy)
                for (int dx = 0; dx < p; ++dx)
                    for (int c = 0; c < 3; ++c) ps.vectors.push_back(img.at(x + dx, y + dy, c));
            for (const auto& m : masks.masks()) {
                int count = 0;
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx) count += m.bitmap[static_cast<std::size_t>(y + dy) * img.width + x + dx];
                if (count * 1.0 >= coverage_threshold * p * p - 1e-9 * p * p) e.classes.push_back(m.class_id);
            }
            if (e.classes.empty()) e.classes.push_back(kBackgroundClass);
            ps.entries.push_back(std::move(e));
        }
    }
    return ps;
}

namespace {

double centered_cosine_distance(std::span<const double> raw_q, std::span<const float> raw_b,
                                std::span<const float> mean) {
    double qb = 0.0, qq = 0.0, bb = 0.0;
    for (std::size_t d = 0; d < mean.size(); ++d) {
        const double q = raw_q[d] - mean[d];
        const double b = static_cast<double>(raw_b[d]) - mean[d];
        qb += q * b;
        qq += q * q;
        bb += b * b;
    }
    const double nq = std::sqrt(qq), nb = std::sqrt(bb);
    if (nq <= kZeroNorm || nb <= kZeroNorm) return 1.0;
    return 1.0 - qb / (nq * nb);
}

}  // namespace

std::vector<NeighborList> brute_force_knn(const MemoryBank& bank, std::span<const double> queries, int k) {
    if (k < 1) throw Error("k must be >= 1");
    const std::size_t dim = bank.dim();
    if (queries.size() % dim != 0) throw Error("query dimension mismatch");
    std::vector<NeighborList> out;
    for (std::size_t q = 0; q < queries.size() / dim; ++q) {
        NeighborList all;
        for (std::size_t j = 0; j < bank.count(); ++j)
            all.push_back({static_cast<std::uint32_t>(j),
                           centered_cosine_distance(queries.subspan(q * dim, dim), bank.raw(j), bank.mean())});
        std::sort(all.begin(), all.end(), neighbor_less);
        all.resize(std::min<std::size_t>(all.size(), k));
        out.push_back(std::move(all));
    }
    return out;
}

CxLossReport dense_cx_loss(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                           const CxConfig& cfg) {
    if (!(cfg.h > 0.0)) throw Error("bandwidth h must be > 0");
    CxLossReport report;
    for (const auto& scale : cfg.scales) {
        const PatchSet ps = reference::extract_patches(image, masks, scale, cfg.coverage_threshold);
        std::map<ClassId, std::vector<std::size_t>> members;
        for (std::size_t p = 0; p < ps.count(); ++p)
            for (ClassId c : ps.entries[p].classes) members[c].push_back(p);
        double scale_loss = 0.0;
        for (const auto& [c, idx] : members) {
            const MemoryBank& bank = banks.at(c, scale).bank;
            double sum_max = 0.0;
            for (std::size_t i : idx) {
                std::vector<double> d(bank.count());
                for (std::size_t j = 0; j < bank.count(); ++j)
                    d[j] = centered_cosine_distance(ps.vector(i), bank.raw(j), bank.mean());
                const double dmin = *std::min_element(d.begin(), d.end());
                double z = 0.0, top = 0.0;
                for (std::size_t j = 0; j < d.size(); ++j) {
                    const double e = std::exp((1.0 - d[j] / (dmin + cfg.epsilon)) / cfg.h -
                                              (1.0 - dmin / (dmin + cfg.epsilon)) / cfg.h);
                    z += e;
                    top = std::max(top, e);
                }
                sum_max += top / z;
            }
            const double loss = 0.0 - std::log(sum_max / static_cast<double>(idx.size()));
            report.classes.push_back({scale, c, loss, idx.size()});
            scale_loss += loss;
        }
        report.scales.push_back({scale, scale_loss});
        report.total += scale_loss;
    }
    return report;
}

}  // namespace a2r::reference
