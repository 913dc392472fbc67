#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "a2r/error.hpp"
#include "a2r/metrics.hpp"
#include "support.hpp"

using namespace a2r;
using namespace a2r::metrics;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

GaussianStats random_gaussian(int d, std::uint64_t seed) {
    const Eigen::MatrixXd a = random_matrix(d, d, seed);
    GaussianStats g;
    g.mean = random_matrix(d, 1, seed + 1000);
    g.cov = a * a.transpose();
    return g;
}

GaussianStats scalar(double m, double var) {
    GaussianStats g;
    g.mean = Eigen::VectorXd::Constant(1, m);
    g.cov = Eigen::MatrixXd::Constant(1, 1, var);
    return g;
}

}  // namespace

TEST_CASE("gaussian fit") {
    FeatureSet f{Eigen::MatrixXd(2, 1)};
    f.rows << 0, 2;
    const auto g = gaussian_fit(f);
    CHECK(g.mean(0) == 1.0);
    CHECK(g.cov(0, 0) == 2.0);

    FeatureSet same{Eigen::MatrixXd::Constant(5, 3, 0.25)};
    const auto s = gaussian_fit(same);
    CHECK(s.mean.isApproxToConstant(0.25));
    CHECK(s.cov.isZero());

    FeatureSet r{random_matrix(40, 6, 1)};
    FeatureSet p{r.rows.colwise().reverse()};
    const auto a = gaussian_fit(r), b = gaussian_fit(p);
    CHECK((a.mean - b.mean).norm() <= 1e-12);
    CHECK((a.cov - b.cov).norm() <= 1e-12);
    CHECK((a.cov - a.cov.transpose()).norm() == 0.0);

    CHECK_THROWS_AS(gaussian_fit(FeatureSet{Eigen::MatrixXd(1, 3)}), Error);
}

TEST_CASE("PSD square root") {
    CHECK(matrix_sqrt_psd(Eigen::MatrixXd::Identity(4, 4)).isApprox(Eigen::MatrixXd::Identity(4, 4)));
    Eigen::MatrixXd d = Eigen::Vector2d(4, 9).asDiagonal();
    const Eigen::MatrixXd sd = matrix_sqrt_psd(d);
    CHECK(sd(0, 0) == doctest::Approx(2.0));
    CHECK(sd(1, 1) == doctest::Approx(3.0));
    CHECK(std::abs(sd(0, 1)) <= 1e-12);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::MatrixXd a = random_matrix(5, 5, seed);
        const Eigen::MatrixXd m = a * a.transpose();
        const Eigen::MatrixXd s = matrix_sqrt_psd(m);
        CHECK((s * s - m).norm() <= 1e-6 * m.norm());
        // sqrt(S*S) = S for PSD S.
        CHECK((matrix_sqrt_psd(s * s) - s).norm() <= 1e-5 * std::max(1.0, s.norm()));
    }

    // Rank deficient with rounding noise.
    const Eigen::MatrixXd low = random_matrix(6, 2, 3);
    const Eigen::MatrixXd m = low * low.transpose();
    const Eigen::MatrixXd s = matrix_sqrt_psd(m);
    CHECK(s.allFinite());
    CHECK((s * s - m).norm() <= 1e-6 * m.norm());

    Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(matrix_sqrt_psd(asym), Error);
}

TEST_CASE("frechet distance") {
    CHECK(fid(scalar(0, 1), scalar(1, 1)) == doctest::Approx(1.0));
    CHECK(fid(scalar(3, 4), scalar(3, 1)) == doctest::Approx(1.0));

    GaussianStats a, b;
    a.mean = Eigen::VectorXd::Zero(5);
    b.mean = Eigen::VectorXd::LinSpaced(5, 1.0, 3.0);
    a.cov = b.cov = Eigen::MatrixXd::Identity(5, 5);
    CHECK(fid(a, b) == doctest::Approx(b.mean.squaredNorm()));

    // Diagonal covariances: sum of (sigma1 - sigma2)^2.
    a.cov = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0).asDiagonal();
    b.cov = Eigen::VectorXd::LinSpaced(5, 2.0, 0.5).asDiagonal();
    b.mean = a.mean;
    double expect = 0.0;
    for (int i = 0; i < 5; ++i) expect += std::pow(std::sqrt(a.cov(i, i)) - std::sqrt(b.cov(i, i)), 2);
    CHECK(fid(a, b) == doctest::Approx(expect).epsilon(1e-10));

    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const int d = 2 + static_cast<int>(seed) * 8;
        const auto g = random_gaussian(d, seed), h = random_gaussian(d, seed + 77);
        CHECK(std::abs(fid(g, g)) <= 1e-6);
        const double gh = fid(g, h), hg = fid(h, g);
        CHECK(gh >= 0.0);
        CHECK(std::abs(gh - hg) <= 1e-6 * std::max(1.0, gh));
    }

    CHECK_THROWS_AS(fid(scalar(0, 1), random_gaussian(2, 1)), Error);
}

TEST_CASE("mean entropy") {
    CHECK(mean_entropy(Eigen::MatrixXd::Identity(3, 3)) == 0.0);
    CHECK(mean_entropy(Eigen::MatrixXd::Constant(4, 2, 0.5)) == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(mean_entropy(Eigen::MatrixXd::Constant(2, 1000, 1e-3)) == doctest::Approx(6.907755).epsilon(1e-6));
    // Rows off by < 1e-4 are renormalized.
    CHECK(mean_entropy(Eigen::MatrixXd::Constant(1, 2, 0.50004)) == doctest::Approx(std::log(2.0)));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const int n = 2 + t;
        Eigen::MatrixXd row(1, n);
        for (int j = 0; j < n; ++j) row(0, j) = t % 3 == 0 && j > 0 ? 0.0 : u(rng);
        row /= row.sum();
        const double h = mean_entropy(row);
        CHECK(h >= 0.0);
        CHECK(h <= std::log(n) + 1e-12);
    }

    Eigen::MatrixXd neg(1, 2);
    neg << 1.2, -0.2;
    CHECK_THROWS_AS(mean_entropy(neg), Error);
    CHECK_THROWS_AS(mean_entropy(Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("feature files") {
    const auto dir = a2r::testing::temp_dir("metrics_io");
    FeatureSet f{random_matrix(7, 3, 9)};
    save_features(f, dir / "f.bin");
    const FeatureSet back = load_features(dir / "f.bin");
    REQUIRE(back.n() == 7);
    REQUIRE(back.d() == 3);
    CHECK((back.rows - f.rows).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(back.rows == back.rows.cast<float>().cast<double>());

    {
        std::ofstream csv(dir / "f.csv");
        csv << "0.5,1,2\n-1, 3.25 ,4\n\n";
    }
    const FeatureSet c = load_features(dir / "f.csv");
    REQUIRE(c.n() == 2);
    CHECK(c.rows(1, 1) == 3.25);

    {
        std::ofstream csv(dir / "ragged.csv");
        csv << "1,2\n3\n";
    }
    CHECK_THROWS_AS(load_features(dir / "ragged.csv"), Error);
    CHECK_THROWS_AS(load_features(dir / "missing.bin"), Error);

    // Truncated payload.
    std::filesystem::resize_file(dir / "f.bin", 20);
    CHECK_THROWS_AS(load_features(dir / "f.bin"), Error);
}
