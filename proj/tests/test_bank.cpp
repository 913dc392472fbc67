#include <doctest.h>

#include <fstream>
#include <iterator>

#include "a2r/bank.hpp"
#include "a2r/binio.hpp"
#include "a2r/error.hpp"
#include "support.hpp"

using namespace a2r;
using a2r::testing::temp_dir;

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<float> random_vectors(std::size_t n, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(n * dim);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("constant image gives a single background bank") {
    const std::vector<CorpusItem> corpus{{Image(8, 8, 0.4), LabelMaskSet(8, 8)}};
    const auto banks = build_banks(corpus, {4, 4});
    REQUIRE(banks.size() == 1);
    const MemoryBank& b = banks.at(kBackgroundClass);
    CHECK(b.count() == 4);
    CHECK(b.dim() == 48);
    for (float m : b.mean()) CHECK(m == 0.4f);
    for (std::size_t j = 0; j < b.count(); ++j)
        for (float v : b.raw(j)) CHECK(v == 0.4f);
    CHECK(b.centered_norm(0) == 0.0);
    CHECK_FALSE(b.quantized());
    CHECK_FALSE(b.pca().has_value());
}

TEST_CASE("per-class counts match a re-extraction oracle") {
    const int w = 20, h = 20;
    LabelMaskSet m1(w, h), m2(w, h);
    std::vector<std::uint8_t> left(w * h, 0), right(w * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) (x < 10 ? left : right)[y * w + x] = 1;
    m1.add(1, left);
    m2.add(2, right);
    const std::vector<CorpusItem> corpus{{a2r::testing::random_image(w, h, 1), m1},
                                         {a2r::testing::random_image(w, h, 2), m2}};
    const ScaleSpec s{4, 3};
    const auto banks = build_banks(corpus, s);

    std::map<ClassId, std::size_t> expected;
    std::map<ClassId, std::vector<double>> sums;
    for (const auto& item : corpus) {
        const PatchSet ps = extract_patches(item.image, item.masks, s);
        for (std::size_t p = 0; p < ps.count(); ++p)
            for (ClassId c : ps.entries[p].classes) {
                ++expected[c];
                auto& acc = sums[c];
                acc.resize(s.dim(), 0.0);
                for (int d = 0; d < s.dim(); ++d) acc[d] += ps.vector(p)[d];
            }
    }
    REQUIRE(banks.size() == expected.size());
    CHECK(banks.count(0) == 1);
    CHECK(banks.count(1) == 1);
    CHECK(banks.count(2) == 1);
    for (const auto& [c, n] : expected) {
        const MemoryBank& b = banks.at(c);
        CHECK(b.count() == n);
        CHECK(b.class_id() == c);
        for (int d = 0; d < s.dim(); ++d) CHECK(b.mean()[d] == doctest::Approx(sums[c][d] / n).epsilon(1e-6));
    }
}

TEST_CASE("corpus totals follow the count formula") {
    // 2048 photos of 256x256 at (16,6): 1681 windows each.
    CHECK(static_cast<std::size_t>(grid_extent(256, {16, 6})) * grid_extent(256, {16, 6}) * 2048 == 3'442'688);

    std::vector<CorpusItem> corpus;
    for (int i = 0; i < 6; ++i)
        corpus.push_back({a2r::testing::random_image(40, 40, 100 + i), a2r::testing::horizon_masks(40, 40, 13 + i)});
    const ScaleSpec s{16, 6};
    const auto banks = build_banks(corpus, s);
    std::size_t total = 0;
    for (const auto& [c, b] : banks) total += b.count();
    const std::size_t per_image = static_cast<std::size_t>(grid_extent(40, s)) * grid_extent(40, s);
    CHECK(total >= corpus.size() * per_image);
}

TEST_CASE("build errors and determinism") {
    CHECK_THROWS_AS(build_banks(std::span<const CorpusItem>{}, {4, 4}), Error);
    CHECK_THROWS_AS(MemoryBank::from_vectors(1, {2, 1}, {}), Error);
    CHECK_THROWS_AS(MemoryBank::from_vectors(1, {2, 1}, std::vector<float>(13, 0.f)), Error);

    std::vector<CorpusItem> corpus;
    for (int i = 0; i < 4; ++i)
        corpus.push_back({a2r::testing::random_image(24, 24, i), a2r::testing::horizon_masks(24, 24, 10)});
    const auto a = build_banks(corpus, {8, 5});
    const auto b = build_banks(corpus, {8, 5});
    REQUIRE(a.size() == b.size());
    for (const auto& [c, bank] : a) CHECK(bank.serialize() == b.at(c).serialize());
}

TEST_CASE("bank persistence") {
    const auto dir = temp_dir("bank_io");
    const std::vector<CorpusItem> corpus{{Image(8, 8, 0.4), LabelMaskSet(8, 8)}};
    const MemoryBank gray = build_banks(corpus, {4, 4}).at(0);
    const auto path = dir / "gray.a2rb";
    gray.save(path);

    SUBCASE("raw round-trip is bit-identical") {
        const MemoryBank loaded = MemoryBank::load(path);
        CHECK(loaded.serialize() == gray.serialize());
        CHECK(loaded.fingerprint() == gray.fingerprint());
        CHECK(read_all(path).size() == 4 + 4 + 4 + 2 + 2 + 4 + 8 + 4 + 48 * 4 + 4 * 48 * 4 + 4);
    }
    SUBCASE("header layout") {
        const auto bytes = read_all(path);
        CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "A2RB");
        CHECK(bytes[4] == 1);  // version
        CHECK(bytes[12] == 4);  // patch size
        CHECK(bytes[14] == 4);  // stride
        CHECK(bytes[16] == 48);  // dim
        CHECK(bytes[20] == 4);   // count
    }
    SUBCASE("corrupted payload byte fails the checksum") {
        auto bytes = read_all(path);
        bytes[bytes.size() - 10] ^= 0x5a;
        write_all(path, bytes);
        try {
            MemoryBank::load(path);
            FAIL("expected a checksum error");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("checksum") != std::string::npos);
        }
    }
    SUBCASE("bad magic") {
        auto bytes = read_all(path);
        bytes[0] = 'X';
        write_all(path, bytes);
        CHECK_THROWS_WITH_AS(MemoryBank::load(path), doctest::Contains("magic"), FormatError);
    }
    SUBCASE("unsupported version") {
        auto bytes = read_all(path);
        bytes[4] = 9;
        // Re-seal so only the version is wrong.
        bytes.resize(bytes.size() - 4);
        const std::uint32_t crc = binio::crc32(bytes);
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
        write_all(path, bytes);
        CHECK_THROWS_WITH_AS(MemoryBank::load(path), doctest::Contains("version"), FormatError);
    }
    SUBCASE("truncated payload") {
        auto bytes = read_all(path);
        bytes.resize(6);
        write_all(path, bytes);
        CHECK_THROWS_AS(MemoryBank::load(path), FormatError);
        // A short body with a valid checksum is reported as truncated.
        auto body = gray.serialize();
        body.resize(100);
        const std::uint32_t crc = binio::crc32(body);
        for (int i = 0; i < 4; ++i) body.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
        write_all(path, body);
        CHECK_THROWS_WITH_AS(MemoryBank::load(path), doctest::Contains("truncated"), FormatError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(MemoryBank::load(dir / "nope.a2rb"), Error); }
}

TEST_CASE("compressed banks") {
    const ScaleSpec s{4, 4};
    const std::size_t n = 600;
    BankBuildOptions opts;
    opts.force_compress = true;
    opts.pca_dim = 16;
    const MemoryBank b = MemoryBank::from_vectors(3, s, random_vectors(n, 48, 9), opts);
    REQUIRE(b.quantized());
    REQUIRE(b.pca().has_value());
    CHECK(b.search_dim() == 16);

    SUBCASE("PCA rows are orthonormal") {
        const PcaModel& p = *b.pca();
        for (int r = 0; r < p.output_dim; ++r)
            for (int q = 0; q < p.output_dim; ++q) {
                double dot = 0.0;
                for (int d = 0; d < p.input_dim; ++d)
                    dot += static_cast<double>(p.components[r * 48 + d]) * p.components[q * 48 + d];
                CHECK(std::abs(dot - (r == q ? 1.0 : 0.0)) <= 1e-5);
            }
    }
    SUBCASE("mean is taken before projection") {
        std::vector<double> acc(48, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (int d = 0; d < 48; ++d) acc[d] += b.raw(j)[d];
        for (int d = 0; d < 48; ++d) CHECK(std::abs(acc[d] / n - b.mean()[d]) <= 1e-5);
    }
    SUBCASE("codes decode within tolerance of the search-space vectors") {
        const QuantParams& q = *b.quant();
        std::vector<double> raw(48);
        std::vector<float> exact(16), decoded(16);
        double worst = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            for (int d = 0; d < 48; ++d) raw[d] = b.raw(j)[d];
            b.to_search_space(raw, exact);
            b.search_vector(j, decoded);
            for (int d = 0; d < 16; ++d) {
                CHECK(q.lo[d] <= q.hi[d]);
                const double err = std::abs(static_cast<double>(decoded[d]) - exact[d]);
                worst = std::max(worst, err - q.tolerance(d));
            }
        }
        CHECK(worst <= 0.0);
    }
    SUBCASE("quantized round-trip") {
        const auto dir = temp_dir("bank_quant");
        b.save(dir / "q.a2rb");
        const MemoryBank l = MemoryBank::load(dir / "q.a2rb");
        CHECK(l.serialize() == b.serialize());
        std::vector<float> x(16), y(16);
        for (std::size_t j = 0; j < n; ++j) {
            b.search_vector(j, x);
            l.search_vector(j, y);
            REQUIRE(x == y);
        }
    }
}

TEST_CASE("PCA reconstructs low-rank data") {
    // Rank-3 data in 12 dimensions projected to 4 components.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> basis(3, std::vector<double>(12));
    for (auto& v : basis)
        for (auto& x : v) x = g(rng);
    std::vector<float> data;
    for (int i = 0; i < 200; ++i) {
        const double a = g(rng), b = g(rng), c = g(rng);
        for (int d = 0; d < 12; ++d) data.push_back(static_cast<float>(0.5 + 0.1 * (a * basis[0][d] + b * basis[1][d] + c * basis[2][d])));
    }
    const PcaModel p = PcaModel::fit(data, 12, 4);
    std::vector<double> x(12), z(4);
    for (int i = 0; i < 200; ++i) {
        for (int d = 0; d < 12; ++d) x[d] = data[i * 12 + d];
        p.project(x, z);
        for (int d = 0; d < 12; ++d) {
            double rec = p.mean[d];
            for (int r = 0; r < 4; ++r) rec += z[r] * p.components[r * 12 + d];
            CHECK(std::abs(rec - x[d]) <= 1e-5);
        }
    }
    CHECK_THROWS_AS(PcaModel::fit(data, 12, 13), Error);
}

TEST_CASE("PCA threshold") {
    BankBuildOptions opts;
    opts.pca_threshold = 100;
    CHECK_FALSE(MemoryBank::from_vectors(1, {2, 1}, random_vectors(99, 12, 1), opts).quantized());
    const MemoryBank big = MemoryBank::from_vectors(1, {2, 1}, random_vectors(100, 12, 1), opts);
    CHECK(big.quantized());
    CHECK(big.pca()->output_dim == 12);  // min(64, dim)
}
