// Serial reference paths vs the OpenMP kernels.
//   bench_kernels [threads]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "a2r/ann.hpp"
#include "a2r/cxloss.hpp"
#include "a2r/reference.hpp"

using namespace a2r;

namespace {

double seconds(const std::function<void()>& f, int reps) {
    f();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

Image noise_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h);
    for (auto& v : img.data) v = u(rng);
    return img;
}

LabelMaskSet halves(int w, int h) {
    LabelMaskSet set(w, h);
    std::vector<std::uint8_t> top(static_cast<std::size_t>(w) * h, 0), bottom(top.size(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) (y < h / 2 ? top : bottom)[static_cast<std::size_t>(y) * w + x] = 1;
    set.add(1, std::move(top));
    set.add(2, std::move(bottom));
    return set;
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-34s %12.3f ms %12.3f ms %8.2fx\n", name, serial * 1e3, parallel * 1e3, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
    const int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_max_threads();
    omp_set_num_threads(threads);
    std::printf("threads %d\n", threads);
    std::printf("%-34s %15s %15s %9s\n", "kernel", "serial ref", "openmp", "speedup");

    const Image big = noise_image(256, 256, 1);
    const LabelMaskSet masks = halves(256, 256);
    for (const auto& s : default_scales()) {
        const std::string name = "extract " + s.to_string();
        row(name.c_str(), seconds([&] { reference::extract_patches(big, masks, s); }, 3),
            seconds([&] { extract_patches(big, masks, s); }, 3));
    }

    {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        std::vector<float> raw(20000 * 48);
        for (auto& v : raw) v = u(rng);
        const MemoryBank bank = MemoryBank::from_vectors(0, {4, 4}, raw);
        const AnnIndex index = AnnIndex::train(bank);
        std::vector<double> queries(500 * 48);
        for (auto& v : queries) v = u(rng);
        row("knn 500q x 20000 brute vs ivf", seconds([&] { reference::brute_force_knn(bank, queries, 5); }, 1),
            seconds([&] { search(index, bank, queries, {}); }, 3));
        row("knn 500q x 20000 brute vs ivf all",
            seconds([&] { reference::brute_force_knn(bank, queries, 5); }, 1),
            seconds([&] { search(index, bank, queries, {.nprobe = kProbeAll}); }, 1));
    }

    {
        const Image src = noise_image(128, 128, 3);
        const Image img = noise_image(128, 128, 4);
        const LabelMaskSet m = halves(128, 128);
        const std::vector<CorpusItem> corpus{{src, m}};
        const BankStore store = build_store(corpus, default_scales());
        const CxConfig cfg;
        row("cx loss 128x128 dense vs sparse", seconds([&] { reference::dense_cx_loss(img, store, m, cfg); }, 1),
            seconds([&] { multiscale_cx_loss(img, store, m, cfg); }, 3));
        const double g1 = [&] {
            omp_set_num_threads(1);
            const double t = seconds([&] { cx_loss_gradient(img, store, m, cfg); }, 3);
            omp_set_num_threads(threads);
            return t;
        }();
        row("cx loss+grad 1 thread vs N", g1, seconds([&] { cx_loss_gradient(img, store, m, cfg); }, 3));
    }
    return 0;
}
