#include "a2r/imaging.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "a2r/error.hpp"

namespace a2r {

Image::Image(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * channels, fill) {}

void LabelMaskSet::add(ClassId id, std::vector<std::uint8_t> bitmap) {
    if (id == kBackgroundClass)
        throw Error("class id 0 is reserved for the background");
    if (bitmap.size() != static_cast<std::size_t>(width_) * height_)
        throw Error("mask for class " + std::to_string(id) + " does not match image dimensions");
    for (const auto& m : masks_)
        if (m.class_id == id) throw Error("duplicate class id " + std::to_string(id));
    for (auto& b : bitmap) b = b ? 1 : 0;
    auto pos = std::lower_bound(masks_.begin(), masks_.end(), id,
                                [](const LabelMask& m, ClassId v) { return m.class_id < v; });
    masks_.insert(pos, LabelMask{id, std::move(bitmap)});
}

bool LabelMaskSet::covered(int x, int y) const {
    const std::size_t i = static_cast<std::size_t>(y) * width_ + x;
    return std::any_of(masks_.begin(), masks_.end(), [i](const LabelMask& m) { return m.bitmap[i] != 0; });
}

std::size_t LabelMaskSet::background_count() const {
    std::size_t n = 0;
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (!covered(x, y)) ++n;
    return n;
}

std::string ScaleSpec::to_string() const {
    return std::to_string(patch_size) + "x" + std::to_string(patch_size) + ":" + std::to_string(stride);
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw Error("invalid " + std::string(what) + ": '" + std::string(s) + "'");
    return v;
}

}  // namespace

ScaleSpec parse_scale(std::string_view text) {
    const auto colon = text.find(':');
    const auto cross = text.find('x');
    if (colon == std::string_view::npos || cross == std::string_view::npos || cross > colon)
        throw Error("scale must look like PxP:S, got '" + std::string(text) + "'");
    const int w = parse_int(text.substr(0, cross), "patch width");
    const int h = parse_int(text.substr(cross + 1, colon - cross - 1), "patch height");
    const int s = parse_int(text.substr(colon + 1), "stride");
    if (w != h) throw Error("only square patches are supported: '" + std::string(text) + "'");
    if (w < 1 || s < 1) throw Error("patch size and stride must be >= 1");
    return {w, s};
}

std::vector<ScaleSpec> parse_scales(std::string_view text) {
    std::vector<ScaleSpec> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(parse_scale(text.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (out.empty()) throw Error("empty scale list");
    return out;
}

std::vector<ScaleSpec> default_scales() { return {{4, 4}, {8, 5}, {16, 6}}; }

int grid_extent(int image_dim, const ScaleSpec& scale) {
    return (image_dim - scale.patch_size) / scale.stride + 1;
}

void validate_scale(const ScaleSpec& scale, int width, int height) {
    if (scale.patch_size < 1 || scale.stride < 1)
        throw Error("patch size and stride must be >= 1");
    if (scale.patch_size > width || scale.patch_size > height)
        throw Error("scale " + scale.to_string() + " does not fit a " + std::to_string(width) + "x" +
                    std::to_string(height) + " image");
}

void read_patch(const Image& img, int x, int y, int patch_size, std::span<double> out) {
    const std::size_t row = static_cast<std::size_t>(patch_size) * Image::channels;
    for (int dy = 0; dy < patch_size; ++dy) {
        const double* src = img.data.data() + img.index(x, y + dy, 0);
        std::copy(src, src + row, out.data() + dy * row);
    }
}

namespace {

// Summed-area table with a zero border: (w+1)*(h+1).
std::vector<std::uint32_t> integral(const std::vector<std::uint8_t>& bitmap, int w, int h) {
    std::vector<std::uint32_t> s(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
        std::uint32_t run = 0;
        for (int x = 0; x < w; ++x) {
            run += bitmap[static_cast<std::size_t>(y) * w + x];
            s[(y + 1) * static_cast<std::size_t>(w + 1) + x + 1] = s[y * static_cast<std::size_t>(w + 1) + x + 1] + run;
        }
    }
    return s;
}

std::uint32_t box_sum(const std::vector<std::uint32_t>& s, int w, int x, int y, int p) {
    const std::size_t stride = static_cast<std::size_t>(w) + 1;
    return s[(y + p) * stride + x + p] - s[y * stride + x + p] - s[(y + p) * stride + x] + s[y * stride + x];
}

}  // namespace

PatchSet extract_patches(const Image& img, const LabelMaskSet& masks, const ScaleSpec& scale,
                         double coverage_threshold) {
    if (img.width <= 0 || img.height <= 0) throw Error("empty image");
    if (!(coverage_threshold > 0.0 && coverage_threshold <= 1.0))
        throw Error("coverage threshold must lie in (0, 1]");
    if (!masks.empty() && (masks.width() != img.width || masks.height() != img.height))
        throw Error("mask dimensions do not match the image");
    validate_scale(scale, img.width, img.height);

    PatchSet ps;
    ps.scale = scale;
    ps.dim = scale.dim();
    ps.grid_w = grid_extent(img.width, scale);
    ps.grid_h = grid_extent(img.height, scale);
    const std::size_t n = static_cast<std::size_t>(ps.grid_w) * ps.grid_h;
    ps.entries.resize(n);
    ps.vectors.resize(n * ps.dim);

    std::vector<std::vector<std::uint32_t>> sums;
    sums.reserve(masks.masks().size());
    for (const auto& m : masks.masks()) sums.push_back(integral(m.bitmap, img.width, img.height));

    const double area = static_cast<double>(scale.patch_size) * scale.patch_size;
    // Inclusive comparison, robust to the threshold not being exactly representable.
    const double needed = coverage_threshold * area - 1e-9 * area;

#pragma omp parallel for schedule(static)
    for (int gy = 0; gy < ps.grid_h; ++gy) {
        for (int gx = 0; gx < ps.grid_w; ++gx) {
            const std::size_t i = static_cast<std::size_t>(gy) * ps.grid_w + gx;
            auto& e = ps.entries[i];
            e.x = gx * scale.stride;
            e.y = gy * scale.stride;
            read_patch(img, e.x, e.y, scale.patch_size,
                       std::span<double>(ps.vectors.data() + i * ps.dim, ps.dim));
            for (std::size_t m = 0; m < sums.size(); ++m) {
                const auto count = box_sum(sums[m], img.width, e.x, e.y, scale.patch_size);
                if (static_cast<double>(count) >= needed) e.classes.push_back(masks.masks()[m].class_id);
            }
            if (e.classes.empty()) e.classes.push_back(kBackgroundClass);
        }
    }
    return ps;
}

}  // namespace a2r
