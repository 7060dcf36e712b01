#pragma once
#include <mfedch/csv.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/rng.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mfedch {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/*
 * V column-aligned views of the same n samples. View m is stored
 * feature-major as a D_m x n matrix, so sample i of view m is views[m].col(i).
 */
struct MultiViewDataset
{
    std::vector<Matrix> views;
    std::optional<std::vector<int>> labels;

    Index num_views() const { return static_cast<Index>(views.size()); }
    Index num_samples() const { return views.empty() ? 0 : views.front().cols(); }

    std::vector<Index> view_dims() const
    {
        std::vector<Index> dims;
        dims.reserve(views.size());
        for (const auto& v : views) dims.push_back(v.rows());
        return dims;
    }

    // Row offset of each view inside the stacked D x n layout.
    std::vector<Index> offsets() const
    {
        std::vector<Index> out;
        Index acc = 0;
        for (const auto& v : views) {
            out.push_back(acc);
            acc += v.rows();
        }
        return out;
    }

    Index total_dim() const
    {
        Index acc = 0;
        for (const auto& v : views) acc += v.rows();
        return acc;
    }

    Index num_classes() const
    {
        if (!labels || labels->empty()) return 0;
        return *std::max_element(labels->begin(), labels->end()) + 1;
    }

    // Column subset applied identically to every view (and the labels).
    MultiViewDataset select(std::span<const Index> columns) const
    {
        MultiViewDataset out;
        out.views.reserve(views.size());
        for (const auto& v : views) {
            Matrix sub(v.rows(), static_cast<Index>(columns.size()));
            for (std::size_t j = 0; j < columns.size(); ++j) sub.col(j) = v.col(columns[j]);
            out.views.push_back(std::move(sub));
        }
        if (labels) {
            std::vector<int> sub;
            sub.reserve(columns.size());
            for (auto c : columns) sub.push_back((*labels)[c]);
            out.labels = std::move(sub);
        }
        return out;
    }
};

// Shape checks shared by every consumer of a dataset.
inline void check_aligned(const MultiViewDataset& ds)
{
    if (ds.views.empty()) fail(ErrorKind::size, "dataset has no views");
    const auto n = ds.num_samples();
    for (std::size_t m = 0; m < ds.views.size(); ++m) {
        if (ds.views[m].cols() != n) {
            fail(ErrorKind::alignment, "view " + std::to_string(m) + " has " +
                                           std::to_string(ds.views[m].cols()) +
                                           " samples, expected " + std::to_string(n));
        }
    }
    if (ds.labels && static_cast<Index>(ds.labels->size()) != n) {
        fail(ErrorKind::alignment, "label count " + std::to_string(ds.labels->size()) +
                                       " does not match sample count " + std::to_string(n));
    }
}

/*
 * Full dataset invariants: V >= 2, n >= 2, aligned views, finite entries,
 * labels (if any) are 0-based class ids with every class in [0, max] present.
 */
inline void validate(const MultiViewDataset& ds)
{
    check_aligned(ds);
    if (ds.num_views() < 2) fail(ErrorKind::size, "need at least 2 views, got " + std::to_string(ds.num_views()));
    if (ds.num_samples() < 2) fail(ErrorKind::size, "need at least 2 samples, got " + std::to_string(ds.num_samples()));
    for (std::size_t m = 0; m < ds.views.size(); ++m) {
        if (ds.views[m].rows() < 1) fail(ErrorKind::size, "view " + std::to_string(m) + " has no features");
        if (!ds.views[m].allFinite()) fail(ErrorKind::parse, "view " + std::to_string(m) + " has non-finite entries");
    }
    if (ds.labels) {
        const auto& l = *ds.labels;
        if (*std::min_element(l.begin(), l.end()) < 0) fail(ErrorKind::parse, "negative class id");
        std::vector<int> count(static_cast<std::size_t>(ds.num_classes()), 0);
        for (int c : l) ++count[static_cast<std::size_t>(c)];
        for (std::size_t c = 0; c < count.size(); ++c) {
            if (count[c] == 0) fail(ErrorKind::size, "class " + std::to_string(c) + " has no members");
        }
    }
}

/*
 * Loads V sample-major CSV files (n rows x D_m columns each) and an optional
 * label file (one integer per row).
 */
inline MultiViewDataset load_views(const std::vector<std::string>& view_paths,
                                   const std::optional<std::string>& label_path = std::nullopt)
{
    MultiViewDataset ds;
    Index n = -1;
    std::string first_path;
    for (const auto& path : view_paths) {
        Matrix raw = csv::read_matrix(path);
        if (n < 0) {
            n = raw.rows();
            first_path = path;
        } else if (raw.rows() != n) {
            fail(ErrorKind::alignment, "'" + path + "' has " + std::to_string(raw.rows()) +
                                           " rows but '" + first_path + "' has " + std::to_string(n));
        }
        ds.views.push_back(raw.transpose());
    }
    if (label_path) {
        auto labels = csv::read_labels(*label_path);
        if (static_cast<Index>(labels.size()) != n) {
            fail(ErrorKind::alignment, "'" + *label_path + "' has " + std::to_string(labels.size()) +
                                           " rows but views have " + std::to_string(n));
        }
        ds.labels = std::move(labels);
    }
    validate(ds);
    return ds;
}

// Inverse of load_views: view m goes to view_paths[m] in sample-major layout.
inline void save_views(const MultiViewDataset& ds, const std::vector<std::string>& view_paths,
                       const std::optional<std::string>& label_path = std::nullopt)
{
    if (view_paths.size() != ds.views.size()) fail(ErrorKind::usage, "one path per view required");
    for (std::size_t m = 0; m < ds.views.size(); ++m) csv::write_matrix(view_paths[m], ds.views[m].transpose());
    if (label_path) {
        if (!ds.labels) fail(ErrorKind::usage, "dataset has no labels to save");
        csv::write_labels(*label_path, *ds.labels);
    }
}

struct PaddedViewMatrix
{
    Matrix data;        // D x n
    Index source_view;  // 0-based
};

/*
 * View m embedded in the stacked D x n layout: its own row block holds X^m,
 * all other rows are zero. m is 0-based.
 */
inline PaddedViewMatrix stack_padded(const MultiViewDataset& ds, Index m)
{
    if (m < 0 || m >= ds.num_views()) {
        fail(ErrorKind::index, "view index " + std::to_string(m) + " out of range [0, " +
                                   std::to_string(ds.num_views()) + ")");
    }
    PaddedViewMatrix out{Matrix::Zero(ds.total_dim(), ds.num_samples()), m};
    out.data.middleRows(ds.offsets()[m], ds.views[m].rows()) = ds.views[m];
    return out;
}

struct SplitSpec
{
    Index per_class = 1;
    std::uint64_t seed = 0;
    std::uint64_t repeat_index = 0;
};

struct SplitIndices
{
    std::vector<Index> train;
    std::vector<Index> test;
};

/*
 * Per-class random selection of `per_class` training samples; the rest are
 * test samples. Both index lists are ascending. The random stream depends
 * only on (seed, repeat_index).
 */
inline SplitIndices split_indices(const MultiViewDataset& ds, const SplitSpec& spec)
{
    if (!ds.labels) fail(ErrorKind::usage, "split requires labels");
    if (spec.per_class < 1) fail(ErrorKind::size, "per-class training count must be >= 1");
    const auto& labels = *ds.labels;
    const auto classes = ds.num_classes();
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
    for (Index c = 0; c < classes; ++c) {
        const auto size = static_cast<Index>(members[c].size());
        if (spec.per_class >= size) {
            fail(ErrorKind::size, "M=" + std::to_string(spec.per_class) + " is not below the size " +
                                      std::to_string(size) + " of class " + std::to_string(c));
        }
    }

    Rng rng(derive_seed(spec.seed, spec.repeat_index));
    SplitIndices out;
    for (auto& group : members) {
        rng.shuffle(group.begin(), group.end());
        out.train.insert(out.train.end(), group.begin(), group.begin() + spec.per_class);
        out.test.insert(out.test.end(), group.begin() + spec.per_class, group.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline std::pair<MultiViewDataset, MultiViewDataset> split(const MultiViewDataset& ds, const SplitSpec& spec)
{
    const auto idx = split_indices(ds, spec);
    return {ds.select(idx.train), ds.select(idx.test)};
}

/*
 * Gaussian blobs: for each class and view a center drawn from
 * N(0, center_scale^2 I); samples are center + N(0, noise_sigma^2 I).
 * Samples are ordered class-major, per_class per class.
 */
inline MultiViewDataset synth_blobs(Index num_views, Index classes, Index per_class,
                                    const std::vector<Index>& dims, double noise_sigma,
                                    std::uint64_t seed, double center_scale = 3.0)
{
    if (num_views < 1 || classes < 1 || per_class < 1)
        fail(ErrorKind::config, "synth_blobs counts must be >= 1");
    if (static_cast<Index>(dims.size()) != num_views)
        fail(ErrorKind::config, "synth_blobs needs one dimension per view");
    if (!(noise_sigma >= 0.0)) fail(ErrorKind::config, "noise_sigma must be >= 0");
    for (auto d : dims)
        if (d < 1) fail(ErrorKind::config, "view dimensions must be >= 1");

    Rng rng(seed);
    std::vector<Matrix> centers;
    for (Index m = 0; m < num_views; ++m) {
        Matrix c(dims[m], classes);
        for (Index k = 0; k < classes; ++k)
            for (Index r = 0; r < dims[m]; ++r) c(r, k) = center_scale * rng.normal();
        centers.push_back(std::move(c));
    }

    const Index n = classes * per_class;
    MultiViewDataset ds;
    for (Index m = 0; m < num_views; ++m) ds.views.emplace_back(dims[m], n);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index k = 0; k < classes; ++k) {
        for (Index s = 0; s < per_class; ++s) {
            const Index i = k * per_class + s;
            labels[i] = static_cast<int>(k);
            for (Index m = 0; m < num_views; ++m)
                for (Index r = 0; r < dims[m]; ++r)
                    ds.views[m](r, i) = centers[m](r, k) + noise_sigma * rng.normal();
        }
    }
    ds.labels = std::move(labels);
    return ds;
}

/*
 * Per-feature zero mean / unit variance (population variance). Constant
 * features are only centered.
 */
inline MultiViewDataset standardize(MultiViewDataset ds)
{
    for (auto& v : ds.views) {
        const auto n = static_cast<double>(v.cols());
        for (Index r = 0; r < v.rows(); ++r) {
            const double mean = v.row(r).sum() / n;
            v.row(r).array() -= mean;
            const double sd = std::sqrt(v.row(r).squaredNorm() / n);
            if (sd > 0.0) v.row(r) /= sd;
        }
    }
    return ds;
}

} // namespace mfedch
