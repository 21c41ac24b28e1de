// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 fuserec contributors
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fuserec/binio.hpp"
#include "fuserec/common.hpp"
#include "fuserec/crc32.hpp"
#include "fuserec/embedding.hpp"

namespace fuserec::fusion {

enum class FusionType { Concat, Avg, Pca, Cca };

inline const char* fusion_name(FusionType t) {
    switch (t) {
        case FusionType::Concat: return "concat";
        case FusionType::Avg: return "avg";
        case FusionType::Pca: return "pca";
        case FusionType::Cca: return "cca";
    }
    return "?";
}

struct FusionKind {
    FusionType type = FusionType::Concat;
    int target_dim = 128;     // PCA output dimension
    int per_view_dim = 32;    // CCA components per view (output dim = 2x this)
    double ridge = 1e-3;      // CCA ridge, relative to the mean covariance diagonal

    static FusionKind concat() { return {FusionType::Concat, 0, 0, 0.0}; }
    static FusionKind avg() { return {FusionType::Avg, 0, 0, 0.0}; }
    static FusionKind pca(int dim) { return {FusionType::Pca, dim, 0, 0.0}; }
    static FusionKind cca(int per_view, double ridge = 1e-3) {
        return {FusionType::Cca, 0, per_view, ridge};
    }
};

/// A fitted fusion transform. Which parameter block is populated depends on
/// `kind.type`; Concat/Avg carry no learned parameters.
struct FusionModel {
    FusionKind kind;
    std::vector<int> input_dims;
    int output_dim = 0;

    // PCA: z = projection * ((x_concat - mean) / feature_scale)
    Eigen::VectorXd mean;
    Eigen::VectorXd feature_scale;  // empty when fitted without standardization
    Eigen::MatrixXd projection;     // output_dim x D, orthonormal rows
    Eigen::VectorXd explained_variance_ratio;

    // CCA: z = [proj_a^T (x_a - mean_a) ; proj_b^T (x_b - mean_b)]
    Eigen::VectorXd mean_a, mean_b;
    Eigen::MatrixXd proj_a, proj_b;  // d_a x k, d_b x k
    Eigen::VectorXd correlations;    // canonical correlations, descending
};

struct FusedSpace {
    FusionModel model;
    std::map<ItemId, Eigen::VectorXd> item_vectors;

    int dim() const { return model.output_dim; }
};

namespace detail {

inline std::vector<ItemId> aligned_ids(const std::vector<emb::EmbeddingMatrix>& views) {
    if (views.empty()) throw ConfigError("fusion requires at least one view");
    std::vector<ItemId> ids;
    ids.reserve(views[0].entries.size());
    for (const auto& [id, _] : views[0].entries) ids.push_back(id);
    for (std::size_t v = 1; v < views.size(); ++v) {
        if (views[v].entries.size() != ids.size())
            throw DataError("fusion views are not id-aligned (sizes differ); run align_ids first");
        for (ItemId id : ids)
            if (!views[v].entries.count(id))
                throw DataError("fusion views are not id-aligned (id " + std::to_string(id) +
                                " missing from view " + std::to_string(v) + ")");
    }
    return ids;  // ascending (map order)
}

/// Stack views into an n x sum(dims) row-major data matrix, promoting to f64.
inline Eigen::MatrixXd to_concat_matrix(const std::vector<emb::EmbeddingMatrix>& views,
                                        const std::vector<ItemId>& ids) {
    int total = 0;
    for (const auto& v : views) total += v.dim;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), total);
    for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(ids.size()); ++r) {
        int col = 0;
        for (const auto& v : views) {
            const auto& vec = v.entries.at(ids[static_cast<std::size_t>(r)]);
            for (int j = 0; j < v.dim; ++j) x(r, col + j) = static_cast<double>(vec[static_cast<std::size_t>(j)]);
            col += v.dim;
        }
    }
    return x;
}

/// Flip each row's sign so its first significant entry is positive.
inline void fix_row_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double thresh = 1e-12 * m.row(i).cwiseAbs().maxCoeff();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (std::abs(m(i, j)) > thresh) {
                if (m(i, j) < 0) m.row(i) = -m.row(i);
                break;
            }
        }
    }
}

/// Pseudo inverse-square-root whitening basis: returns d x r with r = rank(cov).
inline Eigen::MatrixXd whitening_basis(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error("whitening: eigendecomposition failed");
    const Eigen::VectorXd evals = es.eigenvalues();  // ascending
    const double max_eig = evals(evals.size() - 1);
    const double tol = max_eig > 0
                           ? max_eig * static_cast<double>(cov.rows()) * std::numeric_limits<double>::epsilon()
                           : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = evals.size() - 1; i >= 0; --i)
        if (evals(i) > tol && evals(i) > 0) keep.push_back(i);
    Eigen::MatrixXd w(cov.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
        w.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) / std::sqrt(evals(keep[c]));
    return w;
}

inline Eigen::VectorXd item_vector(const emb::EmbeddingMatrix& view, ItemId id) {
    auto it = view.entries.find(id);
    if (it == view.entries.end())
        throw DataError("transform: item " + std::to_string(id) + " missing from view");
    Eigen::VectorXd x(view.dim);
    for (int j = 0; j < view.dim; ++j) x(j) = static_cast<double>(it->second[static_cast<std::size_t>(j)]);
    return x;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stateless operators
// ---------------------------------------------------------------------------

/// z_i = [x_i^(1) || x_i^(2) || ...] in declared view order.
inline FusedSpace fuse_concat(const std::vector<emb::EmbeddingMatrix>& views) {
    const auto ids = detail::aligned_ids(views);
    FusedSpace space;
    space.model.kind = FusionKind::concat();
    int total = 0;
    for (const auto& v : views) {
        space.model.input_dims.push_back(v.dim);
        total += v.dim;
    }
    space.model.output_dim = total;
    for (ItemId id : ids) {
        Eigen::VectorXd z(total);
        int off = 0;
        for (const auto& v : views) {
            const auto& vec = v.entries.at(id);
            for (int j = 0; j < v.dim; ++j) z(off + j) = static_cast<double>(vec[static_cast<std::size_t>(j)]);
            off += v.dim;
        }
        space.item_vectors.emplace(id, std::move(z));
    }
    return space;
}

/// Componentwise mean across equal-dimension views.
inline FusedSpace fuse_avg(const std::vector<emb::EmbeddingMatrix>& views) {
    const auto ids = detail::aligned_ids(views);
    for (const auto& v : views)
        if (v.dim != views[0].dim)
            throw DataError("fuse_avg: view dimensions differ (" + std::to_string(views[0].dim) + " vs " +
                            std::to_string(v.dim) + ")");
    FusedSpace space;
    space.model.kind = FusionKind::avg();
    for (const auto& v : views) space.model.input_dims.push_back(v.dim);
    space.model.output_dim = views[0].dim;
    for (ItemId id : ids) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(views[0].dim);
        for (const auto& v : views) z += detail::item_vector(v, id);
        z /= static_cast<double>(views.size());
        space.item_vectors.emplace(id, std::move(z));
    }
    return space;
}

// ---------------------------------------------------------------------------
// PCA of the concatenated views
// ---------------------------------------------------------------------------

/// Centering-only by default; `standardize` additionally scales each feature
/// to unit variance before the decomposition.
inline FusionModel fit_pca(const std::vector<emb::EmbeddingMatrix>& views, int target_dim,
                           bool standardize = false) {
    const auto ids = detail::aligned_ids(views);
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (n < 2) throw DataError("fit_pca: need at least 2 items");
    Eigen::MatrixXd x = detail::to_concat_matrix(views, ids);
    const Eigen::Index d = x.cols();
    if (target_dim < 1 || target_dim > std::min<Eigen::Index>(n, d))
        throw ConfigError("fit_pca: target_dim " + std::to_string(target_dim) + " outside [1, min(n_items, dim)] = [1, " +
                          std::to_string(std::min<Eigen::Index>(n, d)) + "]");

    FusionModel model;
    model.kind = FusionKind::pca(target_dim);
    for (const auto& v : views) model.input_dims.push_back(v.dim);
    model.output_dim = target_dim;
    model.mean = x.colwise().mean();
    x.rowwise() -= model.mean.transpose();
    if (standardize) {
        Eigen::VectorXd stddev = (x.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
        for (Eigen::Index j = 0; j < stddev.size(); ++j)
            if (stddev(j) == 0.0) stddev(j) = 1.0;  // constant feature: centering already zeroed it
        model.feature_scale = stddev;
        x.array().rowwise() /= stddev.transpose().array();
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();  // descending
    const double tol = sv(0) * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    if (target_dim > rank)
        throw DataError("fit_pca: data has effective rank " + std::to_string(rank) +
                        " < target_dim " + std::to_string(target_dim) + "; refusing to pad projection rows");

    model.projection = svd.matrixV().leftCols(target_dim).transpose();
    detail::fix_row_signs(model.projection);
    const double total_var = sv.array().square().sum();
    model.explained_variance_ratio =
        sv.head(target_dim).array().square() / (total_var > 0 ? total_var : 1.0);
    return model;
}

inline FusedSpace transform_pca(const FusionModel& model, const std::vector<emb::EmbeddingMatrix>& views) {
    if (model.kind.type != FusionType::Pca) throw ConfigError("transform_pca: model is not a PCA model");
    if (views.size() != model.input_dims.size())
        throw DataError("transform_pca: view count mismatch");
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].dim != model.input_dims[i])
            throw DataError("transform_pca: view " + std::to_string(i) + " has dim " +
                            std::to_string(views[i].dim) + ", model expects " + std::to_string(model.input_dims[i]));
    const auto ids = detail::aligned_ids(views);
    FusedSpace space;
    space.model = model;
    for (ItemId id : ids) {
        Eigen::VectorXd x(model.mean.size());
        int off = 0;
        for (const auto& v : views) {
            x.segment(off, v.dim) = detail::item_vector(v, id);
            off += v.dim;
        }
        x -= model.mean;
        if (model.feature_scale.size() > 0) x.array() /= model.feature_scale.array();
        space.item_vectors.emplace(id, model.projection * x);
    }
    return space;
}

// ---------------------------------------------------------------------------
// CCA between two views: whiten each view, SVD of the whitened cross-covariance
// ---------------------------------------------------------------------------

inline FusionModel fit_cca(const emb::EmbeddingMatrix& view_a, const emb::EmbeddingMatrix& view_b,
                           int per_view_dim, double ridge = 1e-3) {
    if (ridge < 0) throw ConfigError("fit_cca: ridge must be >= 0");
    const auto ids = detail::aligned_ids({view_a, view_b});
    const auto n = static_cast<Eigen::Index>(ids.size());
    if (n < 3) throw DataError("fit_cca: need at least 3 items");
    if (per_view_dim < 1 ||
        per_view_dim > std::min<Eigen::Index>({view_a.dim, view_b.dim, n - 1}))
        throw ConfigError("fit_cca: per_view_dim " + std::to_string(per_view_dim) +
                          " outside [1, min(d_a, d_b, n-1)]");

    Eigen::MatrixXd a = detail::to_concat_matrix({view_a}, ids);
    Eigen::MatrixXd b = detail::to_concat_matrix({view_b}, ids);

    FusionModel model;
    model.kind = FusionKind::cca(per_view_dim, ridge);
    model.input_dims = {view_a.dim, view_b.dim};
    model.output_dim = 2 * per_view_dim;
    model.mean_a = a.colwise().mean();
    model.mean_b = b.colwise().mean();
    a.rowwise() -= model.mean_a.transpose();
    b.rowwise() -= model.mean_b.transpose();

    const double denom = static_cast<double>(n - 1);
    Eigen::MatrixXd caa = (a.transpose() * a) / denom;
    Eigen::MatrixXd cbb = (b.transpose() * b) / denom;
    const Eigen::MatrixXd cab = (a.transpose() * b) / denom;

    // Ridge scaled by the mean covariance diagonal keeps the knob unit-free.
    if (ridge > 0) {
        caa.diagonal().array() += ridge * caa.trace() / static_cast<double>(caa.rows());
        cbb.diagonal().array() += ridge * cbb.trace() / static_cast<double>(cbb.rows());
    }

    const Eigen::MatrixXd wa = detail::whitening_basis(caa);
    const Eigen::MatrixXd wb = detail::whitening_basis(cbb);
    const auto attainable = std::min(wa.cols(), wb.cols());
    if (per_view_dim > attainable)
        throw DataError("fit_cca: per_view_dim " + std::to_string(per_view_dim) +
                        " exceeds attainable rank " + std::to_string(attainable));

    const Eigen::MatrixXd cross = wa.transpose() * cab * wb;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);

    model.correlations = svd.singularValues()
                             .head(per_view_dim)
                             .cwiseMax(0.0)
                             .cwiseMin(1.0 + 1e-9);
    model.proj_a = wa * svd.matrixU().leftCols(per_view_dim);
    model.proj_b = wb * svd.matrixV().leftCols(per_view_dim);

    // Sign convention: first significant loading of each canonical direction
    // in view A is positive; B flips with A to keep correlations positive.
    for (int j = 0; j < per_view_dim; ++j) {
        const double thresh = 1e-12 * model.proj_a.col(j).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < model.proj_a.rows(); ++i) {
            if (std::abs(model.proj_a(i, j)) > thresh) {
                if (model.proj_a(i, j) < 0) {
                    model.proj_a.col(j) = -model.proj_a.col(j);
                    model.proj_b.col(j) = -model.proj_b.col(j);
                }
                break;
            }
        }
    }
    return model;
}

/// z = [proj_a^T (x_a - mean_a) || proj_b^T (x_b - mean_b)], dim = 2 * per_view_dim.
inline FusedSpace transform_cca(const FusionModel& model, const emb::EmbeddingMatrix& view_a,
                                const emb::EmbeddingMatrix& view_b) {
    if (model.kind.type != FusionType::Cca) throw ConfigError("transform_cca: model is not a CCA model");
    if (view_a.dim != model.input_dims[0] || view_b.dim != model.input_dims[1])
        throw DataError("transform_cca: view dimensions do not match the fitted model");
    const auto ids = detail::aligned_ids({view_a, view_b});
    const auto k = model.proj_a.cols();
    FusedSpace space;
    space.model = model;
    for (ItemId id : ids) {
        Eigen::VectorXd z(2 * k);
        z.head(k) = model.proj_a.transpose() * (detail::item_vector(view_a, id) - model.mean_a);
        z.tail(k) = model.proj_b.transpose() * (detail::item_vector(view_b, id) - model.mean_b);
        space.item_vectors.emplace(id, std::move(z));
    }
    return space;
}

// ---------------------------------------------------------------------------
// FUS1 binary sidecar (same header discipline as EMB1)
//   magic "FUS1" | u16 version=1 | payload | u32 CRC-32 over payload
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kFus1Version = 1;

namespace detail {
inline void put_vector(std::vector<char>& out, const Eigen::VectorXd& v) {
    binio::put_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) binio::put_f64(out, v(i));
}

inline void put_matrix(std::vector<char>& out, const Eigen::MatrixXd& m) {
    binio::put_u64(out, static_cast<std::uint64_t>(m.rows()));
    binio::put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) binio::put_f64(out, m(i, j));
}

inline Eigen::VectorXd get_vector(binio::Reader& r) {
    const auto n = static_cast<Eigen::Index>(r.u64());
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = r.f64();
    return v;
}

inline Eigen::MatrixXd get_matrix(binio::Reader& r) {
    const auto rows = static_cast<Eigen::Index>(r.u64());
    const auto cols = static_cast<Eigen::Index>(r.u64());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.f64();
    return m;
}
}  // namespace detail

inline void save_fusion_model(const FusionModel& model, const std::string& path) {
    std::vector<char> payload;
    payload.push_back(static_cast<char>(model.kind.type));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.kind.target_dim));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.kind.per_view_dim));
    binio::put_f64(payload, model.kind.ridge);
    binio::put_u32(payload, static_cast<std::uint32_t>(model.input_dims.size()));
    for (int d : model.input_dims) binio::put_u32(payload, static_cast<std::uint32_t>(d));
    binio::put_u32(payload, static_cast<std::uint32_t>(model.output_dim));
    detail::put_vector(payload, model.mean);
    detail::put_vector(payload, model.feature_scale);
    detail::put_matrix(payload, model.projection);
    detail::put_vector(payload, model.explained_variance_ratio);
    detail::put_vector(payload, model.mean_a);
    detail::put_vector(payload, model.mean_b);
    detail::put_matrix(payload, model.proj_a);
    detail::put_matrix(payload, model.proj_b);
    detail::put_vector(payload, model.correlations);

    std::vector<char> file;
    file.insert(file.end(), {'F', 'U', 'S', '1'});
    binio::put_u16(file, kFus1Version);
    file.insert(file.end(), payload.begin(), payload.end());
    binio::put_u32(file, crc32(payload.data(), payload.size()));
    binio::write_file_atomic(path, file);
}

inline FusionModel load_fusion_model(const std::string& path) {
    const auto buf = binio::read_file(path);
    binio::Reader r(buf.data(), buf.size(), path);
    const auto magic = r.magic();
    if (std::string(magic.data(), 4) != "FUS1") throw DataError(path + ": bad magic (expected FUS1)");
    if (r.u16() != kFus1Version) throw DataError(path + ": unsupported FUS1 version");
    if (buf.size() < r.pos() + 4) throw DataError(path + ": truncated file");
    const std::size_t payload_size = buf.size() - r.pos() - 4;
    const std::uint32_t actual = crc32(buf.data() + r.pos(), payload_size);

    FusionModel model;
    r.need(1);
    model.kind.type = static_cast<FusionType>(buf[r.pos()]);
    binio::Reader body(buf.data() + r.pos() + 1, payload_size - 1, path);
    model.kind.target_dim = static_cast<int>(body.u32());
    model.kind.per_view_dim = static_cast<int>(body.u32());
    model.kind.ridge = body.f64();
    const auto n_views = body.u32();
    for (std::uint32_t i = 0; i < n_views; ++i) model.input_dims.push_back(static_cast<int>(body.u32()));
    model.output_dim = static_cast<int>(body.u32());
    model.mean = detail::get_vector(body);
    model.projection = detail::get_matrix(body);
    model.explained_variance_ratio = detail::get_vector(body);
    model.mean_a = detail::get_vector(body);
    model.mean_b = detail::get_vector(body);
    model.proj_a = detail::get_matrix(body);
    model.proj_b = detail::get_matrix(body);
    model.correlations = detail::get_vector(body);
    if (body.remaining() != 0) throw DataError(path + ": trailing bytes in payload");

    binio::Reader tail(buf.data() + buf.size() - 4, 4, path);
    if (tail.u32() != actual) throw DataError(path + ": checksum mismatch");
    return model;
}

}  // namespace fuserec::fusion
