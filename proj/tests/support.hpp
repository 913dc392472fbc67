#pragma once

// Shared fixtures for the test binaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "a2r/imaging.hpp"

namespace a2r::testing {

inline Image random_image(int w, int h, std::uint64_t seed, double lo = 0.05, double hi = 0.95) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h);
    for (auto& v : img.data) v = u(rng);
    return img;
}

// A small "landscape": a sky gradient over a striped ground, both with noise.
// Pixel values are multiples of 1/255 so PNG round trips are exact.
inline Image synthetic_photo(int w, int h, std::uint64_t seed, int horizon) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.04);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double r, g, b;
            if (y < horizon) {
                const double t = static_cast<double>(y) / horizon;
                r = 0.35 + 0.3 * t;
                g = 0.55 + 0.2 * t;
                b = 0.9 - 0.1 * t;
            } else {
                const bool stripe = ((x + 2 * y) / 3) % 2 == 0;
                r = stripe ? 0.45 : 0.3;
                g = stripe ? 0.6 : 0.4;
                b = stripe ? 0.2 : 0.15;
            }
            for (int c = 0; c < 3; ++c) {
                const double base = c == 0 ? r : (c == 1 ? g : b);
                const double v = std::clamp(base + noise(rng), 0.0, 1.0);
                img.at(x, y, c) = std::round(v * 255.0) / 255.0;
            }
        }
    return img;
}

// Overcast variant: mid-gray tones around 0.5 with banded sky and striped
// ground, so a gray start is within a few tenths of every pixel.
inline Image midtone_photo(int w, int h, std::uint64_t seed, int horizon, double amp = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.04);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v;
                if (y < horizon)
                    v = 0.5 + amp * std::sin(0.5 * x + 0.9 * y + c);
                else
                    v = 0.5 + amp * (((x + 2 * y) / 3) % 2 ? 1.0 : -1.0) * (c == 2 ? 0.5 : 1.0);
                img.at(x, y, c) = std::round(std::clamp(v + noise(rng), 0.0, 1.0) * 255.0) / 255.0;
            }
    return img;
}

// Class 1 above the horizon, class 2 below.
inline LabelMaskSet horizon_masks(int w, int h, int horizon) {
    LabelMaskSet set(w, h);
    std::vector<std::uint8_t> sky(static_cast<std::size_t>(w) * h, 0), ground(sky.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) (y < horizon ? sky : ground)[static_cast<std::size_t>(y) * w + x] = 1;
    set.add(1, std::move(sky));
    set.add(2, std::move(ground));
    return set;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("a2r_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace a2r::testing
