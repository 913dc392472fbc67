#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace a2r {

using ClassId = std::uint32_t;

// Pixels covered by no mask belong to this class.
inline constexpr ClassId kBackgroundClass = 0;
inline constexpr double kDefaultCoverage = 0.20;

// RGB raster, row-major, channel-interleaved, values in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0);

    static constexpr int channels = 3;

    std::size_t size() const { return data.size(); }
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c) { return data[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data[index(x, y, c)]; }
};

struct LabelMask {
    ClassId class_id = 0;
    std::vector<std::uint8_t> bitmap;  // width*height, 0 or 1
};

// Per-class membership rasters. Masks may overlap; background is implicit.
class LabelMaskSet {
public:
    LabelMaskSet() = default;
    LabelMaskSet(int width, int height) : width_(width), height_(height) {}

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<LabelMask>& masks() const { return masks_; }
    bool empty() const { return masks_.empty(); }

    // Throws on dimension mismatch, duplicate id or the reserved background id.
    void add(ClassId id, std::vector<std::uint8_t> bitmap);

    bool covered(int x, int y) const;
    std::size_t background_count() const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<LabelMask> masks_;
};

struct ScaleSpec {
    int patch_size = 0;
    int stride = 0;

    int dim() const { return Image::channels * patch_size * patch_size; }
    // "PxP:S", e.g. "8x8:5".
    std::string to_string() const;
    auto operator<=>(const ScaleSpec&) const = default;
};

ScaleSpec parse_scale(std::string_view text);
// Comma-separated list of scales.
std::vector<ScaleSpec> parse_scales(std::string_view text);
std::vector<ScaleSpec> default_scales();

struct PatchEntry {
    int x = 0;
    int y = 0;
    std::vector<ClassId> classes;  // ascending, never empty
};

struct PatchSet {
    ScaleSpec scale;
    int dim = 0;
    int grid_w = 0;
    int grid_h = 0;
    std::vector<PatchEntry> entries;  // row-major grid order
    std::vector<double> vectors;      // entries.size() * dim

    std::size_t count() const { return entries.size(); }
    std::span<const double> vector(std::size_t i) const {
        return {vectors.data() + i * dim, static_cast<std::size_t>(dim)};
    }
};

// Number of window positions along one axis.
int grid_extent(int image_dim, const ScaleSpec& scale);

void validate_scale(const ScaleSpec& scale, int width, int height);

// Copies the window at (x, y) into out (size scale.dim()).
void read_patch(const Image& img, int x, int y, int patch_size, std::span<double> out);

// Sliding-window extraction with class assignment by the coverage rule: a
// patch carries class c iff at least coverage_threshold of its pixels lie in
// mask c; patches with no such class carry the background class.
PatchSet extract_patches(const Image& img, const LabelMaskSet& masks, const ScaleSpec& scale,
                         double coverage_threshold = kDefaultCoverage);

Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);
LabelMaskSet load_masks(const std::filesystem::path& dir, int width, int height);

// Writes one `<class_id>.png` per mask into dir.
void save_masks(const LabelMaskSet& masks, const std::filesystem::path& dir);

}  // namespace a2r
