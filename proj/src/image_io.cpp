#include <png.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "a2r/error.hpp"
#include "a2r/imaging.hpp"

namespace a2r {

namespace fs = std::filesystem;

namespace {

struct Raster8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

bool has_png_signature(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint8_t sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// want_color: true -> RGB output, false -> single gray channel.
Raster8 read_png(const fs::path& path, bool want_color) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw Error("cannot read PNG " + path.string() + ": " + image.message);
    const bool is_color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    if (want_color && !is_color) {
        png_image_free(&image);
        throw Error(path.string() + ": grayscale image, RGB required");
    }
    if (!want_color && is_color) {
        png_image_free(&image);
        throw Error(path.string() + ": mask must be single-channel");
    }
    image.format = want_color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    Raster8 r;
    r.width = static_cast<int>(image.width);
    r.height = static_cast<int>(image.height);
    r.channels = want_color ? 3 : 1;
    r.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw Error("cannot decode PNG " + path.string() + ": " + msg);
    }
    return r;
}

void write_png(const fs::path& path, const Raster8& r) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(r.width);
    image.height = static_cast<png_uint_32>(r.height);
    image.format = r.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, r.pixels.data(), 0, nullptr))
        throw Error("cannot write PNG " + path.string() + ": " + image.message);
}

// Binary PPM (P6), maxval 255.
Raster8 read_ppm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    auto token = [&]() {
        std::string t;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(c);
        }
        return t;
    };
    const std::string magic = token();
    if (magic == "P5" || magic == "P2") throw Error(path.string() + ": grayscale image, RGB required");
    if (magic != "P6") throw Error(path.string() + ": unsupported image format");
    auto num = [&](const char* what) {
        const std::string t = token();
        int v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || p != t.data() + t.size()) throw Error(path.string() + ": bad PPM " + what);
        return v;
    };
    Raster8 r;
    r.width = num("width");
    r.height = num("height");
    const int maxval = num("maxval");
    if (maxval != 255) throw Error(path.string() + ": only 8-bit PPM supported");
    if (r.width <= 0 || r.height <= 0) throw Error(path.string() + ": zero dimension");
    r.channels = 3;
    r.pixels.resize(static_cast<std::size_t>(r.width) * r.height * 3);
    in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.pixels.size())) throw Error(path.string() + ": truncated PPM");
    return r;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image load_image(const fs::path& path) {
    if (!fs::exists(path)) throw Error("no such file: " + path.string());
    const Raster8 r = has_png_signature(path) ? read_png(path, true) : read_ppm(path);
    if (r.width <= 0 || r.height <= 0) throw Error(path.string() + ": zero dimension");
    Image img(r.width, r.height);
    std::transform(r.pixels.begin(), r.pixels.end(), img.data.begin(),
                   [](std::uint8_t v) { return static_cast<double>(v) / 255.0; });
    return img;
}

void save_image(const Image& img, const fs::path& path) {
    Raster8 r{img.width, img.height, 3, {}};
    r.pixels.resize(img.data.size());
    std::transform(img.data.begin(), img.data.end(), r.pixels.begin(), to_byte);
    if (path.extension() == ".ppm") {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << "P6\n" << r.width << " " << r.height << "\n255\n";
        out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
        return;
    }
    write_png(path, r);
}

LabelMaskSet load_masks(const fs::path& dir, int width, int height) {
    if (!fs::is_directory(dir)) throw Error("mask directory not found: " + dir.string());
    LabelMaskSet set(width, height);
    // Sorted so that errors and insertion order are deterministic.
    std::map<std::string, fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.emplace(entry.path().filename().string(), entry.path());
    for (const auto& [name, path] : files) {
        const std::string stem = path.stem().string();
        ClassId id = 0;
        auto [p, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), id);
        if (stem.empty() || ec != std::errc{} || p != stem.data() + stem.size())
            throw Error("mask file name is not a class id: " + name);
        Raster8 r = read_png(path, false);
        if (r.width != width || r.height != height)
            throw Error("mask " + name + " is " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                        ", expected " + std::to_string(width) + "x" + std::to_string(height));
        set.add(id, std::move(r.pixels));
    }
    return set;
}

void save_masks(const LabelMaskSet& masks, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& m : masks.masks()) {
        Raster8 r{masks.width(), masks.height(), 1, {}};
        r.pixels.resize(m.bitmap.size());
        std::transform(m.bitmap.begin(), m.bitmap.end(), r.pixels.begin(),
                       [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
        write_png(dir / (std::to_string(m.class_id) + ".png"), r);
    }
}

}  // namespace a2r
