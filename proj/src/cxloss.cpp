#include "a2r/cxloss.hpp"

#include <algorithm>
#include <cmath>

#include "a2r/error.hpp"

namespace a2r {

std::vector<double> normalize_distances(std::span<const double> row, double eps) {
    if (row.empty()) throw Error("cannot normalize an empty distance row");
    const double denom = *std::min_element(row.begin(), row.end()) + eps;
    std::vector<double> out(row.size());
    std::transform(row.begin(), row.end(), out.begin(), [denom](double d) { return d / denom; });
    return out;
}

std::vector<double> affinities(std::span<const double> normalized, double h) {
    if (!(h > 0.0)) throw Error("bandwidth h must be > 0");
    if (normalized.empty()) throw Error("cannot compute affinities of an empty row");
    std::vector<double> out(normalized.size());
    // Largest logit belongs to the smallest normalized distance.
    const double lo = *std::min_element(normalized.begin(), normalized.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < normalized.size(); ++j) {
        out[j] = std::exp((lo - normalized[j]) / h);
        sum += out[j];
    }
    for (auto& a : out) a /= sum;
    return out;
}

AffinityRow make_row(std::size_t patch, std::span<const Neighbor> candidates, double h, double eps) {
    AffinityRow row;
    row.patch = patch;
    row.ids.reserve(candidates.size());
    row.distances.reserve(candidates.size());
    for (const auto& c : candidates) {
        row.ids.push_back(c.id);
        row.distances.push_back(c.distance);
    }
    row.normalized = normalize_distances(row.distances, eps);
    row.affinity = affinities(row.normalized, h);
    row.argmin = static_cast<std::size_t>(std::min_element(row.distances.begin(), row.distances.end()) - row.distances.begin());
    row.argmax = static_cast<std::size_t>(std::max_element(row.affinity.begin(), row.affinity.end()) - row.affinity.begin());
    return row;
}

double class_cx_loss(std::span<const double> row_maxes) {
    if (row_maxes.empty()) throw Error("contextual loss needs at least one generated patch");
    double s = 0.0;
    for (double m : row_maxes) s += m;
    // max A <= 1 per row, so the mean is <= 1 and the loss >= 0; clamp rounding.
    return std::max(0.0, -std::log(s / static_cast<double>(row_maxes.size())));
}

double class_cx_loss(const AffinityRows& rows) {
    std::vector<double> maxes;
    maxes.reserve(rows.size());
    for (const auto& r : rows) maxes.push_back(r.max_affinity());
    return class_cx_loss(maxes);
}

double image_cx_loss(const std::map<ClassId, AffinityRows>& per_class) {
    double total = 0.0;
    for (const auto& [c, rows] : per_class)
        if (!rows.empty()) total += class_cx_loss(rows);
    return total;
}

namespace {

// dL/dq for one row, where L = -log(S / N) and S is the class sum of row
// maxima. Candidates are fixed; the max routes to the argmax entry only.
void row_gradient(const AffinityRow& row, const MemoryBank& bank, std::span<const double> patch, double row_max_sum,
                  const CxConfig& cfg, std::span<double> out, std::vector<double>& q, std::vector<double>& g_d) {
    std::fill(out.begin(), out.end(), 0.0);
    const int dim = bank.dim();
    const auto mean = bank.mean();
    for (int d = 0; d < dim; ++d) q[d] = patch[d] - mean[d];
    const double qn = norm(q);
    if (qn <= kZeroNorm) return;

    const std::size_t n = row.ids.size();
    const double a_star = row.affinity[row.argmax];
    const double denom = row.distances[row.argmin] + cfg.epsilon;
    const double scale = a_star / (row_max_sum * cfg.h);
    g_d.assign(n, 0.0);
    double through_min = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        const double g_norm = scale * ((l == row.argmax ? 1.0 : 0.0) - row.affinity[l]);
        g_d[l] += g_norm / denom;
        through_min += g_norm * row.distances[l];
    }
    if (!cfg.stop_grad_min) g_d[row.argmin] -= through_min / (denom * denom);

    // d(1 - cos)/dq = -(1/|q|) (b^/|b^| - cos * q/|q|)
    for (std::size_t l = 0; l < n; ++l) {
        if (g_d[l] == 0.0) continue;
        const double bn = bank.centered_norm(row.ids[l]);
        if (bn <= kZeroNorm) continue;
        const double cos = 1.0 - row.distances[l];
        const auto raw = bank.raw(row.ids[l]);
        const double cb = -g_d[l] / (qn * bn);
        const double cq = g_d[l] * cos / (qn * qn);
        for (int d = 0; d < dim; ++d) out[d] += cb * (static_cast<double>(raw[d]) - mean[d]) + cq * q[d];
    }
}

void scatter_patch(std::span<const double> g, int x, int y, int patch_size, const Image& shape,
                   std::vector<double>& grad) {
    const std::size_t row = static_cast<std::size_t>(patch_size) * Image::channels;
    for (int dy = 0; dy < patch_size; ++dy) {
        double* dst = grad.data() + shape.index(x, y + dy, 0);
        const double* src = g.data() + dy * row;
        for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
    }
}

}  // namespace

CxLossReport evaluate_cx(const Image& image, const BankStore& banks, const LabelMaskSet& masks, const CxConfig& cfg,
                         CxRequest request) {
    if (cfg.scales.empty()) throw Error("no scales configured");
    if (!(cfg.h > 0.0)) throw Error("bandwidth h must be > 0");
    if (cfg.k < 1) throw Error("k must be >= 1");

    CxLossReport report;
    if (request.gradient) report.gradient.assign(image.size(), 0.0);

    for (const auto& scale : cfg.scales) {
        const PatchSet ps = extract_patches(image, masks, scale, cfg.coverage_threshold);
        std::map<ClassId, std::vector<std::size_t>> members;
        for (std::size_t p = 0; p < ps.count(); ++p)
            for (ClassId c : ps.entries[p].classes) members[c].push_back(p);
        for (const auto& [c, idx] : members) banks.at(c, scale);

        double scale_loss = 0.0;
        for (const auto& [c, idx] : members) {
            const IndexedBank& ib = banks.at(c, scale);
            const std::size_t n = idx.size();
            const int dim = ps.dim;
            std::vector<double> queries(n * dim);
            for (std::size_t i = 0; i < n; ++i) {
                const auto v = ps.vector(idx[i]);
                std::copy(v.begin(), v.end(), queries.begin() + i * dim);
            }
            const auto neighbors = search(ib.index, ib.bank, queries, SearchParams{cfg.k, cfg.nprobe});

            AffinityRows rows(n);
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
                rows[i] = make_row(idx[i], neighbors[i], cfg.h, cfg.epsilon);

            std::vector<double> maxes(n);
            double max_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                maxes[i] = rows[i].max_affinity();
                max_sum += maxes[i];
            }
            const double loss = class_cx_loss(maxes);
            report.classes.push_back({scale, c, loss, n});
            scale_loss += loss;

            if (request.gradient) {
                std::vector<double> grads(n * dim);
#pragma omp parallel
                {
                    std::vector<double> q(dim);
                    std::vector<double> g_d;
#pragma omp for schedule(static)
                    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
                        row_gradient(rows[i], ib.bank, ps.vector(idx[i]), max_sum, cfg,
                                     std::span<double>(grads.data() + i * dim, dim), q, g_d);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& e = ps.entries[idx[i]];
                    scatter_patch(std::span<const double>(grads.data() + i * dim, dim), e.x, e.y,
                                  scale.patch_size, image, report.gradient);
                }
            }
            if (request.keep_rows) report.rows.push_back({scale, c, std::move(rows)});
        }
        report.scales.push_back({scale, scale_loss});
        report.total += scale_loss;
    }
    return report;
}

CxLossReport multiscale_cx_loss(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                                const CxConfig& cfg) {
    return evaluate_cx(image, banks, masks, cfg);
}

CxLossReport cx_loss_gradient(const Image& image, const BankStore& banks, const LabelMaskSet& masks,
                              const CxConfig& cfg) {
    return evaluate_cx(image, banks, masks, cfg, {.gradient = true});
}

}  // namespace a2r
