#include "a2r/metrics.hpp"

#include <algorithm>
#include <cstring>
#include <iterator>
#include <string_view>
#include <cmath>
#include <fstream>
#include <sstream>

#include "a2r/error.hpp"

namespace a2r::metrics {

namespace {

constexpr double kSymmetryTol = 1e-8;

void check_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw Error("matrix is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) throw Error("matrix is not symmetric");
}

}  // namespace

GaussianStats gaussian_fit(const FeatureSet& f) {
    if (f.n() < 2) throw Error("need at least 2 samples to fit a Gaussian");
    if (!f.rows.allFinite()) throw Error("features contain non-finite values");
    GaussianStats g;
    g.mean = f.rows.colwise().mean().transpose();
    const Eigen::MatrixXd centered = f.rows.rowwise() - g.mean.transpose();
    g.cov = (centered.transpose() * centered) / static_cast<double>(f.n() - 1);
    g.cov = (0.5 * (g.cov + g.cov.transpose())).eval();
    return g;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
    check_symmetric(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

double fid(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows())
        throw Error("FID: feature dimensions differ");
    const Eigen::MatrixXd root_a = matrix_sqrt_psd(a.cov);
    Eigen::MatrixXd inner = root_a * b.cov * root_a;
    inner = (0.5 * (inner + inner.transpose())).eval();
    const double cross = matrix_sqrt_psd(inner).trace();
    const double value = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    return std::max(0.0, value);
}

double mean_entropy(const Eigen::MatrixXd& probs) {
    if (probs.rows() == 0 || probs.cols() == 0) throw Error("entropy: empty probability table");
    double total = 0.0;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        const auto row = probs.row(r);
        if ((row.array() < 0.0).any()) throw Error("entropy: negative probability in row " + std::to_string(r));
        const double s = row.sum();
        if (!(s > 0.0)) throw Error("entropy: row " + std::to_string(r) + " sums to zero");
        double h = 0.0;
        for (Eigen::Index c = 0; c < row.size(); ++c) {
            const double p = row[c] / s;
            if (p > 0.0) h -= p * std::log(p);
        }
        total += h;
    }
    return total / static_cast<double>(probs.rows());
}

namespace {

FeatureSet load_binary(const std::vector<char>& bytes, const std::filesystem::path& path) {
    auto fail = [&](const std::string& why) { return FormatError("features " + path.string() + ": " + why); };
    if (bytes.size() < 12) throw fail("truncated header");
    std::uint32_t n = 0, d = 0;
    std::memcpy(&n, bytes.data() + 4, 4);
    std::memcpy(&d, bytes.data() + 8, 4);
    const std::size_t expected = 12 + static_cast<std::size_t>(n) * d * 4;
    if (bytes.size() != expected) throw fail("payload size does not match header");
    FeatureSet f;
    f.rows.resize(n, d);
    const char* p = bytes.data() + 12;
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < d; ++j) {
            float v;
            std::memcpy(&v, p, 4);
            p += 4;
            f.rows(i, j) = v;
        }
    return f;
}

FeatureSet load_csv(const std::string& text, const std::filesystem::path& path) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw FormatError("features " + path.string() + ": bad CSV value '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError("features " + path.string() + ": ragged CSV rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("features " + path.string() + ": empty CSV");
    FeatureSet f;
    f.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) f.rows(i, j) = rows[i][j];
    return f;
}

}  // namespace

FeatureSet load_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 4 && std::string_view(bytes.data(), 4) == "A2RF") return load_binary(bytes, path);
    return load_csv(std::string(bytes.begin(), bytes.end()), path);
}

void save_features(const FeatureSet& f, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    const auto n = static_cast<std::uint32_t>(f.n());
    const auto d = static_cast<std::uint32_t>(f.d());
    out.write("A2RF", 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    for (Eigen::Index i = 0; i < f.n(); ++i)
        for (Eigen::Index j = 0; j < f.d(); ++j) {
            const float v = static_cast<float>(f.rows(i, j));
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
}

}  // namespace a2r::metrics
