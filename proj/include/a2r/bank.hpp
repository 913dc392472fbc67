#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "a2r/imaging.hpp"

namespace a2r {

// Per-dimension 8-bit scalar quantizer with min/max bounds.
struct QuantParams {
    std::vector<float> lo;
    std::vector<float> hi;

    static QuantParams fit(std::span<const float> vectors, std::size_t dim);

    std::uint8_t encode(std::size_t d, float v) const;
    float decode(std::size_t d, std::uint8_t code) const;
    // Worst-case reconstruction error for values inside [lo, hi].
    double tolerance(std::size_t d) const { return (static_cast<double>(hi[d]) - lo[d]) / 255.0 / 2.0 + 1e-7; }
};

// Linear projection onto the leading principal directions.
struct PcaModel {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<float> components;  // output_dim rows of input_dim, orthonormal
    std::vector<float> mean;        // input_dim

    // Fits on at most max_samples evenly spaced rows of `vectors`.
    static PcaModel fit(std::span<const float> vectors, int input_dim, int output_dim,
                        std::size_t max_samples = 100000);

    // out = components * (x - mean)
    void project(std::span<const double> x, std::span<double> out) const;
};

struct BankBuildOptions {
    // Banks with at least this many vectors get PCA + scalar quantization.
    std::size_t pca_threshold = 1'000'000;
    // Apply PCA + quantization regardless of size.
    bool force_compress = false;
    // 0 selects min(64, dim).
    int pca_dim = 0;
    double coverage_threshold = kDefaultCoverage;
};

// All real patches of one (class, scale). Immutable once built.
//
// Raw f32 vectors are always retained: distances are evaluated on them. The
// search-space representation (centered, optionally PCA-projected, unit
// length, optionally 8-bit quantized) only drives the approximate candidate
// search.
class MemoryBank {
public:
    static MemoryBank from_vectors(ClassId class_id, ScaleSpec scale, std::vector<float> raw,
                                   const BankBuildOptions& options = {});

    ClassId class_id() const { return class_id_; }
    const ScaleSpec& scale() const { return scale_; }
    int dim() const { return dim_; }
    std::size_t count() const { return count_; }
    std::span<const float> mean() const { return mean_; }
    const std::optional<PcaModel>& pca() const { return pca_; }
    const std::optional<QuantParams>& quant() const { return quant_; }
    bool quantized() const { return quant_.has_value(); }

    std::span<const float> raw(std::size_t j) const {
        return {raw_.data() + j * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<const float> raw_data() const { return raw_; }
    // ||b_j - mean||, evaluated in f64.
    double centered_norm(std::size_t j) const { return norms_[j]; }

    int search_dim() const { return search_dim_; }
    // Maps a raw vector to the search space.
    void to_search_space(std::span<const double> raw, std::span<float> out) const;
    // Search-space vector of bank entry j (decoded when quantized).
    void search_vector(std::size_t j, std::span<float> out) const;
    std::span<const std::uint8_t> codes(std::size_t j) const {
        return {codes_.data() + j * search_dim_, static_cast<std::size_t>(search_dim_)};
    }

    // CRC32 of the serialized bank; binds indices to banks.
    std::uint32_t fingerprint() const { return fingerprint_; }

    std::vector<std::uint8_t> serialize() const;
    void save(const std::filesystem::path& path) const;
    static MemoryBank load(const std::filesystem::path& path);

private:
    MemoryBank() = default;
    void derive();

    ClassId class_id_ = 0;
    ScaleSpec scale_;
    int dim_ = 0;
    std::size_t count_ = 0;
    std::vector<float> mean_;
    std::optional<PcaModel> pca_;
    std::optional<QuantParams> quant_;
    std::vector<float> raw_;
    std::vector<std::uint8_t> codes_;

    // Derived on build/load.
    int search_dim_ = 0;
    std::vector<double> norms_;
    std::vector<float> search_;  // only when not quantized
    std::uint32_t fingerprint_ = 0;
};

struct CorpusItem {
    Image image;
    LabelMaskSet masks;
};

// One bank per class observed in the corpus at this scale (background included
// when any patch falls in it). Parallel over images; merged in corpus order.
std::map<ClassId, MemoryBank> build_banks(std::span<const CorpusItem> corpus, const ScaleSpec& scale,
                                          const BankBuildOptions& options = {});

// File name used for a bank inside a bank directory, e.g. "c3_s8.a2rb".
std::string bank_file_name(ClassId class_id, const ScaleSpec& scale);

}  // namespace a2r
