#include "a2r/bank.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "a2r/binio.hpp"
#include "a2r/error.hpp"

namespace a2r {

namespace {

constexpr std::uint32_t kBankVersion = 1;
constexpr std::uint32_t kFlagQuantized = 1u << 0;
constexpr std::uint32_t kFlagPca = 1u << 1;

}  // namespace

QuantParams QuantParams::fit(std::span<const float> vectors, std::size_t dim) {
    QuantParams q;
    q.lo.assign(dim, 0.0f);
    q.hi.assign(dim, 0.0f);
    const std::size_t n = vectors.size() / dim;
    if (n == 0) return q;
    std::copy_n(vectors.begin(), dim, q.lo.begin());
    std::copy_n(vectors.begin(), dim, q.hi.begin());
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d) {
            q.lo[d] = std::min(q.lo[d], vectors[i * dim + d]);
            q.hi[d] = std::max(q.hi[d], vectors[i * dim + d]);
        }
    return q;
}

std::uint8_t QuantParams::encode(std::size_t d, float v) const {
    const double range = static_cast<double>(hi[d]) - lo[d];
    if (range <= 0.0) return 0;
    const double t = (static_cast<double>(v) - lo[d]) / range * 255.0;
    return static_cast<std::uint8_t>(std::clamp(std::lround(t), 0L, 255L));
}

float QuantParams::decode(std::size_t d, std::uint8_t code) const {
    const double range = static_cast<double>(hi[d]) - lo[d];
    return static_cast<float>(lo[d] + range * code / 255.0);
}

PcaModel PcaModel::fit(std::span<const float> vectors, int input_dim, int output_dim, std::size_t max_samples) {
    if (output_dim < 1 || output_dim > input_dim) throw Error("PCA output dimension out of range");
    const std::size_t n = vectors.size() / input_dim;
    if (n == 0) throw Error("PCA fit on empty data");
    const std::size_t step = std::max<std::size_t>(1, (n + max_samples - 1) / max_samples);
    const std::size_t used = (n + step - 1) / step;

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(input_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (int d = 0; d < input_dim; ++d) mean[d] += vectors[i * input_dim + d];
    mean /= static_cast<double>(n);

    Eigen::MatrixXd x(used, input_dim);
    for (std::size_t r = 0; r < used; ++r)
        for (int d = 0; d < input_dim; ++d) x(r, d) = vectors[r * step * input_dim + d] - mean[d];
    const Eigen::MatrixXd cov = (x.transpose() * x) / std::max<double>(1.0, static_cast<double>(used) - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");

    PcaModel m;
    m.input_dim = input_dim;
    m.output_dim = output_dim;
    m.mean.resize(input_dim);
    for (int d = 0; d < input_dim; ++d) m.mean[d] = static_cast<float>(mean[d]);
    m.components.resize(static_cast<std::size_t>(output_dim) * input_dim);
    // Eigenvalues come ascending; take the largest. Sign fixed so the
    // largest-magnitude entry of each row is positive.
    for (int r = 0; r < output_dim; ++r) {
        Eigen::VectorXd v = eig.eigenvectors().col(input_dim - 1 - r);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) v = -v;
        for (int d = 0; d < input_dim; ++d) m.components[static_cast<std::size_t>(r) * input_dim + d] = static_cast<float>(v[d]);
    }
    return m;
}

void PcaModel::project(std::span<const double> x, std::span<double> out) const {
    for (int r = 0; r < output_dim; ++r) {
        const float* row = components.data() + static_cast<std::size_t>(r) * input_dim;
        double acc = 0.0;
        for (int d = 0; d < input_dim; ++d) acc += row[d] * (x[d] - mean[d]);
        out[r] = acc;
    }
}

MemoryBank MemoryBank::from_vectors(ClassId class_id, ScaleSpec scale, std::vector<float> raw,
                                    const BankBuildOptions& options) {
    const int dim = scale.dim();
    if (dim <= 0) throw Error("invalid scale for memory bank");
    if (raw.empty() || raw.size() % dim != 0) throw Error("memory bank needs a positive whole number of vectors");
    MemoryBank b;
    b.class_id_ = class_id;
    b.scale_ = scale;
    b.dim_ = dim;
    b.count_ = raw.size() / dim;
    b.raw_ = std::move(raw);

    std::vector<double> acc(dim, 0.0);
    for (std::size_t j = 0; j < b.count_; ++j)
        for (int d = 0; d < dim; ++d) acc[d] += b.raw_[j * dim + d];
    b.mean_.resize(dim);
    for (int d = 0; d < dim; ++d) b.mean_[d] = static_cast<float>(acc[d] / static_cast<double>(b.count_));

    if (options.force_compress || b.count_ >= options.pca_threshold) {
        const int out_dim = options.pca_dim > 0 ? std::min(options.pca_dim, dim) : std::min(64, dim);
        PcaModel pca = PcaModel::fit(b.raw_, dim, out_dim);
        pca.mean = b.mean_;  // project around the bank mean
        b.pca_ = std::move(pca);
        b.search_dim_ = out_dim;
        std::vector<float> projected(b.count_ * out_dim);
        std::vector<double> tmp(dim);
        for (std::size_t j = 0; j < b.count_; ++j) {
            for (int d = 0; d < dim; ++d) tmp[d] = b.raw_[j * dim + d];
            b.to_search_space(tmp, std::span<float>(projected.data() + j * out_dim, out_dim));
        }
        b.quant_ = QuantParams::fit(projected, out_dim);
        b.codes_.resize(projected.size());
        for (std::size_t j = 0; j < b.count_; ++j)
            for (int d = 0; d < out_dim; ++d) b.codes_[j * out_dim + d] = b.quant_->encode(d, projected[j * out_dim + d]);
    }
    b.derive();
    return b;
}

void MemoryBank::to_search_space(std::span<const double> raw, std::span<float> out) const {
    std::vector<double> v(search_dim_);
    if (pca_) {
        pca_->project(raw, v);
    } else {
        for (int d = 0; d < dim_; ++d) v[d] = raw[d] - mean_[d];
    }
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (int d = 0; d < search_dim_; ++d) out[d] = static_cast<float>(v[d] * inv);
}

void MemoryBank::search_vector(std::size_t j, std::span<float> out) const {
    if (quant_) {
        for (int d = 0; d < search_dim_; ++d) out[d] = quant_->decode(d, codes_[j * search_dim_ + d]);
    } else {
        std::copy_n(search_.begin() + j * search_dim_, search_dim_, out.begin());
    }
}

void MemoryBank::derive() {
    if (!pca_) search_dim_ = dim_;
    norms_.resize(count_);
    for (std::size_t j = 0; j < count_; ++j) {
        double n2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            const double c = static_cast<double>(raw_[j * dim_ + d]) - mean_[d];
            n2 += c * c;
        }
        norms_[j] = std::sqrt(n2);
    }
    search_.clear();
    if (!quant_) {
        search_.resize(count_ * search_dim_);
        std::vector<double> tmp(dim_);
        for (std::size_t j = 0; j < count_; ++j) {
            for (int d = 0; d < dim_; ++d) tmp[d] = raw_[j * dim_ + d];
            to_search_space(tmp, std::span<float>(search_.data() + j * search_dim_, search_dim_));
        }
    }
    // The sealed CRC of the serialized form (a CRC over data plus its own
    // CRC is a constant, so read the stored value instead).
    const auto bytes = serialize();
    std::memcpy(&fingerprint_, bytes.data() + bytes.size() - 4, 4);
}

std::vector<std::uint8_t> MemoryBank::serialize() const {
    binio::Writer w;
    w.magic("A2RB");
    w.put<std::uint32_t>(kBankVersion);
    w.put<std::uint32_t>(class_id_);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(scale_.patch_size));
    w.put<std::uint16_t>(static_cast<std::uint16_t>(scale_.stride));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dim_));
    w.put<std::uint64_t>(count_);
    w.put<std::uint32_t>((quant_ ? kFlagQuantized : 0u) | (pca_ ? kFlagPca : 0u));
    w.put_array<float>(mean_);
    if (pca_) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(pca_->input_dim));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(pca_->output_dim));
        w.put_array<float>(pca_->components);
        w.put_array<float>(pca_->mean);
    }
    if (quant_) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(quant_->lo.size()));
        w.put_array<float>(quant_->lo);
        w.put_array<float>(quant_->hi);
    }
    w.put_array<float>(raw_);
    if (quant_) w.put_array<std::uint8_t>(codes_);
    w.seal();
    return w.bytes();
}

void MemoryBank::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    binio::Writer w;
    w.put_array<std::uint8_t>(bytes);
    w.write_file(path);
}

MemoryBank MemoryBank::load(const std::filesystem::path& path) {
    auto r = binio::Reader::from_file(path, "A2RB", "bank");
    const auto version = r.get<std::uint32_t>();
    if (version != kBankVersion) throw FormatError("bank " + path.string() + ": unsupported version " + std::to_string(version));
    MemoryBank b;
    b.class_id_ = r.get<std::uint32_t>();
    b.scale_.patch_size = r.get<std::uint16_t>();
    b.scale_.stride = r.get<std::uint16_t>();
    b.dim_ = static_cast<int>(r.get<std::uint32_t>());
    b.count_ = r.get<std::uint64_t>();
    const auto flags = r.get<std::uint32_t>();
    if (b.scale_.patch_size < 1 || b.scale_.stride < 1 || b.dim_ != b.scale_.dim() || b.count_ == 0)
        throw FormatError("bank " + path.string() + ": inconsistent header");
    if (flags & ~(kFlagQuantized | kFlagPca)) throw FormatError("bank " + path.string() + ": unknown flags");
    b.mean_ = r.get_array<float>(b.dim_);
    b.search_dim_ = b.dim_;
    if (flags & kFlagPca) {
        PcaModel p;
        p.input_dim = static_cast<int>(r.get<std::uint32_t>());
        p.output_dim = static_cast<int>(r.get<std::uint32_t>());
        if (p.input_dim != b.dim_ || p.output_dim < 1 || p.output_dim > p.input_dim)
            throw FormatError("bank " + path.string() + ": inconsistent PCA block");
        p.components = r.get_array<float>(static_cast<std::size_t>(p.output_dim) * p.input_dim);
        p.mean = r.get_array<float>(p.input_dim);
        b.search_dim_ = p.output_dim;
        b.pca_ = std::move(p);
    }
    if (flags & kFlagQuantized) {
        QuantParams q;
        const auto qd = r.get<std::uint32_t>();
        if (static_cast<int>(qd) != b.search_dim_) throw FormatError("bank " + path.string() + ": inconsistent quantizer block");
        q.lo = r.get_array<float>(qd);
        q.hi = r.get_array<float>(qd);
        b.quant_ = std::move(q);
    }
    if (b.count_ > r.remaining() / (sizeof(float) * b.dim_)) throw FormatError("bank " + path.string() + ": truncated payload");
    b.raw_ = r.get_array<float>(b.count_ * b.dim_);
    if (b.quant_) b.codes_ = r.get_array<std::uint8_t>(b.count_ * b.search_dim_);
    r.finish();
    b.derive();
    return b;
}

std::map<ClassId, MemoryBank> build_banks(std::span<const CorpusItem> corpus, const ScaleSpec& scale,
                                          const BankBuildOptions& options) {
    if (corpus.empty()) throw Error("cannot build banks from an empty corpus");
    std::vector<PatchSet> sets(corpus.size());
    std::vector<std::string> errors(corpus.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        try {
            sets[i] = extract_patches(corpus[i].image, corpus[i].masks, scale, options.coverage_threshold);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (!errors[i].empty()) throw Error("corpus image " + std::to_string(i) + ": " + errors[i]);

    std::map<ClassId, std::vector<float>> grouped;
    for (const auto& ps : sets)
        for (std::size_t p = 0; p < ps.count(); ++p) {
            const auto v = ps.vector(p);
            for (ClassId c : ps.entries[p].classes) {
                auto& dst = grouped[c];
                for (double x : v) dst.push_back(static_cast<float>(x));
            }
        }
    std::map<ClassId, MemoryBank> banks;
    for (auto& [c, raw] : grouped) banks.emplace(c, MemoryBank::from_vectors(c, scale, std::move(raw), options));
    return banks;
}

std::string bank_file_name(ClassId class_id, const ScaleSpec& scale) {
    return "c" + std::to_string(class_id) + "_s" + std::to_string(scale.patch_size) + ".a2rb";
}

}  // namespace a2r
