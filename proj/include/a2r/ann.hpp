#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "a2r/bank.hpp"

namespace a2r {

struct Neighbor {
    std::uint32_t id = 0;
    double distance = 0.0;  // exact centered cosine distance

    bool operator==(const Neighbor&) const = default;
};

// Ascending by (distance, id).
using NeighborList = std::vector<Neighbor>;

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

struct IndexParams {
    int n_list = 0;  // 0 selects ceil(sqrt(N))
    std::uint64_t seed = 0;
    int iterations = 25;
    int nprobe_default = 0;  // 0 selects max(1, n_list / 16)
    // k-means trains on at most this many points per list (evenly strided).
    int max_points_per_list = 256;
};

// Probe every inverted list.
inline constexpr int kProbeAll = -1;

struct SearchParams {
    int k = 5;
    int nprobe = 0;  // 0 selects the index default; kProbeAll probes everything
    // For quantized banks: candidates scored on codes are cut to
    // k * shortlist_factor before exact re-ranking. 0 disables the cut.
    int shortlist_factor = 8;
};

// Inverted-file index over one memory bank, clustered with seeded k-means in
// the bank's search space.
class AnnIndex {
public:
    static AnnIndex train(const MemoryBank& bank, const IndexParams& params = {});

    int n_list() const { return n_list_; }
    int search_dim() const { return search_dim_; }
    int nprobe_default() const { return nprobe_default_; }
    std::uint64_t seed() const { return seed_; }
    std::uint32_t bank_fingerprint() const { return bank_fingerprint_; }
    std::span<const float> centroid(int l) const {
        return {centroids_.data() + static_cast<std::size_t>(l) * search_dim_, static_cast<std::size_t>(search_dim_)};
    }
    const std::vector<std::uint32_t>& list(int l) const { return lists_[l]; }

    // Throws unless this index was trained on `bank`.
    void check_bound_to(const MemoryBank& bank) const;

    std::vector<std::uint8_t> serialize() const;
    void save(const std::filesystem::path& path) const;
    static AnnIndex load(const std::filesystem::path& path);

    bool operator==(const AnnIndex&) const = default;

private:
    int n_list_ = 0;
    int search_dim_ = 0;
    int nprobe_default_ = 1;
    std::uint64_t seed_ = 0;
    std::uint32_t bank_fingerprint_ = 0;
    std::vector<float> centroids_;
    std::vector<std::vector<std::uint32_t>> lists_;
};

// Exact cosine distance between a centered query (with precomputed norm) and
// bank entry j, accumulated in f64.
double bank_distance(const MemoryBank& bank, std::span<const double> centered_query, double query_norm,
                     std::size_t j);

// k-NN for raw (uncentered) queries laid out row-major with bank.dim()
// columns. Candidates come from the nprobe nearest lists and are re-ranked by
// exact distance on raw vectors. Parallel over queries.
std::vector<NeighborList> search(const AnnIndex& index, const MemoryBank& bank, std::span<const double> queries,
                                 const SearchParams& params);

// Index file name paired with a bank file name ("c3_s8.a2rb" -> "c3_s8.a2ri").
std::filesystem::path index_path_for(const std::filesystem::path& bank_path);

}  // namespace a2r
