#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace a2r::metrics {

// n x d sample matrix, one row per sample.
struct FeatureSet {
    Eigen::MatrixXd rows;

    Eigen::Index n() const { return rows.rows(); }
    Eigen::Index d() const { return rows.cols(); }
};

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Sample mean and (n-1)-normalized covariance, symmetrized.
GaussianStats gaussian_fit(const FeatureSet& f);

// Symmetric PSD square root via eigendecomposition; negative eigenvalues are
// clamped to zero.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m);

// Frechet distance between two Gaussians:
// |m1 - m2|^2 + Tr(C1 + C2 - 2 (C1^{1/2} C2 C1^{1/2})^{1/2}), clamped at 0.
double fid(const GaussianStats& a, const GaussianStats& b);

// Mean Shannon entropy (nats) of the rows, each renormalized to sum to 1.
double mean_entropy(const Eigen::MatrixXd& probs);

// Binary A2RF (magic, u32 n, u32 d, n*d f32) or CSV, chosen by content.
FeatureSet load_features(const std::filesystem::path& path);
void save_features(const FeatureSet& f, const std::filesystem::path& path);

}  // namespace a2r::metrics
