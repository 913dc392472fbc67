#include "a2r/ann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "a2r/binio.hpp"
#include "a2r/distance.hpp"
#include "a2r/error.hpp"

namespace a2r {

namespace {

constexpr std::uint32_t kIndexVersion = 1;

double l2sq(const float* a, const float* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        s += d * d;
    }
    return s;
}

// Nearest centroid, ties to the lower centroid id.
int nearest(const float* v, const std::vector<float>& centroids, int n_list, int dim, double* best_out = nullptr) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int l = 0; l < n_list; ++l) {
        const double d = l2sq(v, centroids.data() + static_cast<std::size_t>(l) * dim, dim);
        if (d < bd) {
            bd = d;
            best = l;
        }
    }
    if (best_out) *best_out = bd;
    return best;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<float> kmeans_pp_seed(const std::vector<float>& pts, std::size_t n, int dim, int k, std::mt19937_64& rng) {
    std::vector<float> c(static_cast<std::size_t>(k) * dim);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t pick = static_cast<std::size_t>(rng() % n);
    std::vector<bool> taken(n, false);
    for (int l = 0; l < k; ++l) {
        std::copy_n(pts.begin() + pick * dim, dim, c.begin() + static_cast<std::size_t>(l) * dim);
        taken[pick] = true;
        if (l + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], l2sq(pts.data() + i * dim, c.data() + static_cast<std::size_t>(l) * dim, dim));
            total += d2[i];
        }
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double run = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                run += d2[i];
                if (run > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            // All remaining points coincide with a centroid; take the next unused one.
            pick = 0;
            while (pick < n && taken[pick]) ++pick;
            if (pick == n) pick = 0;
        }
    }
    return c;
}

}  // namespace

AnnIndex AnnIndex::train(const MemoryBank& bank, const IndexParams& params) {
    const std::size_t n = bank.count();
    if (n == 0) throw Error("cannot index an empty bank");
    const int n_list = params.n_list > 0 ? params.n_list : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    if (static_cast<std::size_t>(n_list) > n)
        throw Error("n_list " + std::to_string(n_list) + " exceeds bank size " + std::to_string(n));
    if (params.iterations < 0) throw Error("k-means iterations must be >= 0");
    const int dim = bank.search_dim();

    std::vector<float> all(n * dim);
    for (std::size_t j = 0; j < n; ++j) bank.search_vector(j, std::span<float>(all.data() + j * dim, dim));

    const std::size_t cap = static_cast<std::size_t>(std::max(1, params.max_points_per_list)) * n_list;
    const std::size_t step = n > cap ? (n + cap - 1) / cap : 1;
    std::vector<float> train_pts;
    if (step == 1) {
        train_pts = all;
    } else {
        for (std::size_t j = 0; j < n; j += step) train_pts.insert(train_pts.end(), all.begin() + j * dim, all.begin() + (j + 1) * dim);
    }
    const std::size_t tn = train_pts.size() / dim;

    std::mt19937_64 rng(params.seed);
    std::vector<float> centroids = kmeans_pp_seed(train_pts, tn, dim, n_list, rng);

    std::vector<int> assign(tn, 0);
    std::vector<double> dist(tn, 0.0);
    for (int it = 0; it < params.iterations; ++it) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(tn); ++i)
            assign[i] = nearest(train_pts.data() + i * dim, centroids, n_list, dim, &dist[i]);

        std::vector<double> sums(static_cast<std::size_t>(n_list) * dim, 0.0);
        std::vector<std::size_t> counts(n_list, 0);
        for (std::size_t i = 0; i < tn; ++i) {
            ++counts[assign[i]];
            for (int d = 0; d < dim; ++d) sums[static_cast<std::size_t>(assign[i]) * dim + d] += train_pts[i * dim + d];
        }
        for (int l = 0; l < n_list; ++l) {
            if (counts[l] == 0) {
                // Re-seed an empty cluster at the worst-served point.
                std::size_t far = 0;
                for (std::size_t i = 1; i < tn; ++i)
                    if (dist[i] > dist[far]) far = i;
                std::copy_n(train_pts.begin() + far * dim, dim, centroids.begin() + static_cast<std::size_t>(l) * dim);
                dist[far] = 0.0;
                continue;
            }
            for (int d = 0; d < dim; ++d)
                centroids[static_cast<std::size_t>(l) * dim + d] =
                    static_cast<float>(sums[static_cast<std::size_t>(l) * dim + d] / static_cast<double>(counts[l]));
        }
    }

    AnnIndex idx;
    idx.n_list_ = n_list;
    idx.search_dim_ = dim;
    idx.nprobe_default_ = params.nprobe_default > 0 ? std::min(params.nprobe_default, n_list) : std::max(1, n_list / 16);
    idx.seed_ = params.seed;
    idx.bank_fingerprint_ = bank.fingerprint();
    idx.centroids_ = std::move(centroids);

    std::vector<int> final_assign(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(n); ++j)
        final_assign[j] = nearest(all.data() + j * dim, idx.centroids_, n_list, dim);
    idx.lists_.assign(n_list, {});
    for (std::size_t j = 0; j < n; ++j) idx.lists_[final_assign[j]].push_back(static_cast<std::uint32_t>(j));
    return idx;
}

void AnnIndex::check_bound_to(const MemoryBank& bank) const {
    if (bank_fingerprint_ != bank.fingerprint() || search_dim_ != bank.search_dim())
        throw Error("index was not built for bank class " + std::to_string(bank.class_id()) + " at scale " +
                    bank.scale().to_string());
}

std::vector<std::uint8_t> AnnIndex::serialize() const {
    binio::Writer w;
    w.magic("A2RI");
    w.put<std::uint32_t>(kIndexVersion);
    w.put<std::uint32_t>(bank_fingerprint_);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(n_list_));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(search_dim_));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(nprobe_default_));
    w.put<std::uint64_t>(seed_);
    w.put_array<float>(centroids_);
    for (const auto& l : lists_) {
        w.put<std::uint64_t>(l.size());
        w.put_array<std::uint32_t>(l);
    }
    w.seal();
    return w.bytes();
}

void AnnIndex::save(const std::filesystem::path& path) const {
    binio::Writer w;
    w.put_array<std::uint8_t>(serialize());
    w.write_file(path);
}

AnnIndex AnnIndex::load(const std::filesystem::path& path) {
    auto r = binio::Reader::from_file(path, "A2RI", "index");
    const auto version = r.get<std::uint32_t>();
    if (version != kIndexVersion) throw FormatError("index " + path.string() + ": unsupported version " + std::to_string(version));
    AnnIndex idx;
    idx.bank_fingerprint_ = r.get<std::uint32_t>();
    idx.n_list_ = static_cast<int>(r.get<std::uint32_t>());
    idx.search_dim_ = static_cast<int>(r.get<std::uint32_t>());
    idx.nprobe_default_ = static_cast<int>(r.get<std::uint32_t>());
    idx.seed_ = r.get<std::uint64_t>();
    if (idx.n_list_ < 1 || idx.search_dim_ < 1 || idx.nprobe_default_ < 1 || idx.nprobe_default_ > idx.n_list_)
        throw FormatError("index " + path.string() + ": inconsistent header");
    idx.centroids_ = r.get_array<float>(static_cast<std::size_t>(idx.n_list_) * idx.search_dim_);
    idx.lists_.resize(idx.n_list_);
    for (auto& l : idx.lists_) l = r.get_array<std::uint32_t>(r.get<std::uint64_t>());
    r.finish();
    return idx;
}

double bank_distance(const MemoryBank& bank, std::span<const double> centered_query, double query_norm, std::size_t j) {
    const double bn = bank.centered_norm(j);
    if (query_norm <= kZeroNorm || bn <= kZeroNorm) return 1.0;
    const auto raw = bank.raw(j);
    const auto mean = bank.mean();
    double s = 0.0;
    for (std::size_t d = 0; d < raw.size(); ++d) s += centered_query[d] * (static_cast<double>(raw[d]) - mean[d]);
    return 1.0 - s / (query_norm * bn);
}

std::vector<NeighborList> search(const AnnIndex& index, const MemoryBank& bank, std::span<const double> queries,
                                 const SearchParams& params) {
    index.check_bound_to(bank);
    const int dim = bank.dim();
    if (params.k < 1) throw Error("k must be >= 1");
    if (queries.size() % dim != 0) throw Error("query dimension does not match bank dimension " + std::to_string(dim));
    const std::size_t nq = queries.size() / dim;
    const int n_list = index.n_list();
    int nprobe = params.nprobe == 0 ? index.nprobe_default() : params.nprobe;
    const bool probe_all = nprobe == kProbeAll || nprobe >= n_list;
    if (!probe_all && nprobe < 1) throw Error("nprobe must be >= 1");
    if (probe_all) nprobe = n_list;
    const int sdim = bank.search_dim();
    const bool shortlist = bank.quantized() && params.shortlist_factor > 0 && !probe_all;

    std::vector<NeighborList> out(nq);
#pragma omp parallel
    {
        std::vector<double> centered(dim);
        std::vector<float> z(sdim);
        std::vector<float> decoded(sdim);
        std::vector<std::pair<double, int>> cdist(n_list);
        std::vector<Neighbor> cand;
#pragma omp for schedule(static)
        for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(nq); ++q) {
            const auto raw = queries.subspan(q * dim, dim);
            const auto mean = bank.mean();
            for (int d = 0; d < dim; ++d) centered[d] = raw[d] - mean[d];
            const double qn = norm(centered);

            cand.clear();
            auto gather = [&](int l) {
                for (auto id : index.list(l)) cand.push_back({id, 0.0});
            };
            if (probe_all) {
                for (int l = 0; l < n_list; ++l) gather(l);
            } else {
                bank.to_search_space(raw, z);
                for (int l = 0; l < n_list; ++l) cdist[l] = {l2sq(z.data(), index.centroid(l).data(), sdim), l};
                std::sort(cdist.begin(), cdist.end());
                int p = 0;
                for (; p < nprobe; ++p) gather(cdist[p].second);
                // Keep probing until at least k candidates exist.
                for (; p < n_list && cand.size() < static_cast<std::size_t>(params.k); ++p) gather(cdist[p].second);
            }

            if (shortlist) {
                const std::size_t keep = static_cast<std::size_t>(params.k) * params.shortlist_factor;
                if (cand.size() > keep) {
                    for (auto& c : cand) {
                        bank.search_vector(c.id, decoded);
                        c.distance = l2sq(z.data(), decoded.data(), sdim);
                    }
                    std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(), neighbor_less);
                    cand.resize(keep);
                }
            }
            for (auto& c : cand) c.distance = bank_distance(bank, centered, qn, c.id);
            const std::size_t k = std::min<std::size_t>(params.k, cand.size());
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), neighbor_less);
            out[q].assign(cand.begin(), cand.begin() + k);
        }
    }
    return out;
}

std::filesystem::path index_path_for(const std::filesystem::path& bank_path) {
    auto p = bank_path;
    p.replace_extension(".a2ri");
    return p;
}

}  // namespace a2r
