#pragma once
#include <mfedch/csv.hpp>
#include <mfedch/dataset.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/hyperparams.hpp>
#include <mfedch/rng.hpp>
#include <mfedch/trainer.hpp>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mfedch {

// Y_m = P_m^T X_m for every view.
inline std::vector<Matrix> project(const Model& model, const MultiViewDataset& ds)
{
    check_aligned(ds);
    if (static_cast<Index>(model.projections.size()) != ds.num_views())
        fail(ErrorKind::shape, "model has " + std::to_string(model.projections.size()) + " views, data has " +
                                   std::to_string(ds.num_views()));
    std::vector<Matrix> Y;
    for (Index m = 0; m < ds.num_views(); ++m) {
        const auto& P = model.projections[m];
        if (P.rows() != ds.views[m].rows())
            fail(ErrorKind::shape, "view " + std::to_string(m) + ": model expects " + std::to_string(P.rows()) +
                                       " features, data has " + std::to_string(ds.views[m].rows()));
        Y.push_back(P.transpose() * ds.views[m]);
    }
    return Y;
}

// Y = sum_m P_m^T X_m.
inline Matrix fuse(const Model& model, const MultiViewDataset& ds)
{
    const auto Y = project(model, ds);
    Matrix out = Y.front();
    for (std::size_t m = 1; m < Y.size(); ++m) {
        if (Y[m].rows() != out.rows()) fail(ErrorKind::shape, "fusion needs a shared embedding dimension");
        out += Y[m];
    }
    return out;
}

/*
 * k-NN accuracy under squared Euclidean distance. Only k = 1 is supported;
 * ties go to the smallest training index.
 */
inline double knn_accuracy(const Matrix& train_emb, std::span<const int> train_labels, const Matrix& test_emb,
                           std::span<const int> test_labels, int k = 1)
{
    if (k != 1) fail(ErrorKind::usage, "only k = 1 is supported");
    if (train_emb.cols() == 0) fail(ErrorKind::usage, "knn_accuracy: empty training set");
    if (test_emb.cols() == 0) fail(ErrorKind::usage, "knn_accuracy: empty test set");
    if (train_emb.rows() != test_emb.rows()) fail(ErrorKind::shape, "train and test embeddings differ in dimension");
    if (static_cast<Index>(train_labels.size()) != train_emb.cols() ||
        static_cast<Index>(test_labels.size()) != test_emb.cols())
        fail(ErrorKind::alignment, "label count does not match embedding columns");

    Index correct = 0;
    for (Index t = 0; t < test_emb.cols(); ++t) {
        Index best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < train_emb.cols(); ++j) {
            const double dist = (train_emb.col(j) - test_emb.col(t)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        if (train_labels[best] == test_labels[t]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_emb.cols());
}

struct ResultRow
{
    std::string label;
    Index M = 0;
    double mean = 0.0;
    double std = 0.0; // population standard deviation over repeats
    Index repeats = 0;
    Index d = 0;
    std::vector<double> accuracies;
};

struct ResultsTable
{
    std::vector<ResultRow> rows;
    Index repeats = 0;
    std::vector<std::uint64_t> seeds; // fit seed of each repeat
};

inline ResultRow summarize(std::string label, Index M, Index d, std::vector<double> acc)
{
    ResultRow row;
    row.label = std::move(label);
    row.M = M;
    row.d = d;
    row.repeats = static_cast<Index>(acc.size());
    double sum = 0.0;
    for (double a : acc) sum += a;
    row.mean = sum / static_cast<double>(acc.size());
    double sq = 0.0;
    for (double a : acc) sq += (a - row.mean) * (a - row.mean);
    row.std = std::sqrt(sq / static_cast<double>(acc.size()));
    row.accuracies = std::move(acc);
    return row;
}

struct ExperimentOptions
{
    std::vector<std::string> view_names; // defaults to view0, view1, ...
    TrainOptions train;
    std::optional<Model> fixed_model;    // evaluate this model instead of fitting per repeat
};

inline std::string view_name(const ExperimentOptions& opts, Index m)
{
    if (m < static_cast<Index>(opts.view_names.size())) return opts.view_names[m];
    return "view" + std::to_string(m);
}

inline std::uint64_t repeat_fit_seed(std::uint64_t base_seed, Index repeat)
{
    return derive_seed(base_seed, 0x66697400ULL + static_cast<std::uint64_t>(repeat));
}

/*
 * Repeated-split protocol for one M: split with (base_seed, r), fit on the
 * training part, then 1-NN accuracy on each per-view embedding, their mean
 * ("Mean"), and the fused embedding ("II").
 */
inline ResultsTable run_experiment(const MultiViewDataset& ds, const Hyperparams& h, Index M, Index repeats,
                                   std::uint64_t base_seed, const ExperimentOptions& opts = {})
{
    if (!ds.labels) fail(ErrorKind::usage, "run_experiment requires labels");
    if (repeats < 1) fail(ErrorKind::usage, "repeats must be >= 1");
    const Index V = ds.num_views();
    std::vector<std::vector<double>> per_view(static_cast<std::size_t>(V));
    std::vector<double> mean_acc, fused_acc;
    ResultsTable table;
    table.repeats = repeats;

    for (Index r = 0; r < repeats; ++r) {
        const auto [train, test] = split(ds, SplitSpec{M, base_seed, static_cast<std::uint64_t>(r)});
        const auto seed = repeat_fit_seed(base_seed, r);
        table.seeds.push_back(seed);
        const Model model = opts.fixed_model ? *opts.fixed_model : fit(train, h, seed, opts.train).model;

        const auto Ytr = project(model, train);
        const auto Yte = project(model, test);
        double view_sum = 0.0;
        for (Index m = 0; m < V; ++m) {
            const double acc = knn_accuracy(Ytr[m], *train.labels, Yte[m], *test.labels);
            per_view[m].push_back(acc);
            view_sum += acc;
        }
        mean_acc.push_back(view_sum / static_cast<double>(V));
        fused_acc.push_back(knn_accuracy(fuse(model, train), *train.labels, fuse(model, test), *test.labels));
    }

    const Index d = opts.fixed_model ? opts.fixed_model->embed_dim() : h.d;
    for (Index m = 0; m < V; ++m) table.rows.push_back(summarize(view_name(opts, m), M, d, per_view[m]));
    table.rows.push_back(summarize("Mean", M, d, mean_acc));
    table.rows.push_back(summarize("II", M, d, fused_acc));
    return table;
}

/*
 * The same protocol on the raw features: per-view rows use X_m directly and
 * the fused row sums the views (identity projections) when all views share
 * a dimension, or concatenates them otherwise.
 */
inline ResultsTable run_raw_baseline(const MultiViewDataset& ds, Index M, Index repeats, std::uint64_t base_seed,
                                     const ExperimentOptions& opts = {})
{
    if (!ds.labels) fail(ErrorKind::usage, "run_raw_baseline requires labels");
    const Index V = ds.num_views();
    const auto dims = ds.view_dims();
    const bool equal_dims = std::all_of(dims.begin(), dims.end(), [&](Index x) { return x == dims.front(); });
    auto fused = [&](const MultiViewDataset& part) {
        if (equal_dims) {
            Matrix out = part.views.front();
            for (Index m = 1; m < V; ++m) out += part.views[m];
            return out;
        }
        Matrix out(part.total_dim(), part.num_samples());
        Index row = 0;
        for (const auto& v : part.views) {
            out.middleRows(row, v.rows()) = v;
            row += v.rows();
        }
        return out;
    };

    std::vector<std::vector<double>> per_view(static_cast<std::size_t>(V));
    std::vector<double> mean_acc, fused_acc;
    ResultsTable table;
    table.repeats = repeats;
    for (Index r = 0; r < repeats; ++r) {
        const auto [train, test] = split(ds, SplitSpec{M, base_seed, static_cast<std::uint64_t>(r)});
        double view_sum = 0.0;
        for (Index m = 0; m < V; ++m) {
            const double acc = knn_accuracy(train.views[m], *train.labels, test.views[m], *test.labels);
            per_view[m].push_back(acc);
            view_sum += acc;
        }
        mean_acc.push_back(view_sum / static_cast<double>(V));
        fused_acc.push_back(knn_accuracy(fused(train), *train.labels, fused(test), *test.labels));
    }
    for (Index m = 0; m < V; ++m) table.rows.push_back(summarize(view_name(opts, m), M, dims[m], per_view[m]));
    table.rows.push_back(summarize("Mean", M, 0, mean_acc));
    table.rows.push_back(summarize("II", M, 0, fused_acc));
    return table;
}

inline void append(ResultsTable& into, const ResultsTable& more)
{
    into.rows.insert(into.rows.end(), more.rows.begin(), more.rows.end());
    into.seeds.insert(into.seeds.end(), more.seeds.begin(), more.seeds.end());
    into.repeats = more.repeats;
}

/*
 * Runs the protocol for every d in `d_values` and keeps, for each
 * (row, M), the d with the highest mean accuracy (first d on ties).
 */
inline ResultsTable run_experiment_sweep(const MultiViewDataset& ds, Hyperparams h, Index M, Index repeats,
                                         std::uint64_t base_seed, const std::vector<Index>& d_values,
                                         const ExperimentOptions& opts = {})
{
    if (d_values.empty()) return run_experiment(ds, h, M, repeats, base_seed, opts);
    ResultsTable best;
    for (auto d : d_values) {
        h.d = d;
        const auto t = run_experiment(ds, h, M, repeats, base_seed, opts);
        if (best.rows.empty()) {
            best = t;
            continue;
        }
        for (std::size_t k = 0; k < t.rows.size(); ++k)
            if (t.rows[k].mean > best.rows[k].mean) best.rows[k] = t.rows[k];
        best.seeds.insert(best.seeds.end(), t.seeds.begin(), t.seeds.end());
    }
    return best;
}

inline std::string format_fixed(double x, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
    return buf;
}

// row_label,M,mean,std,repeats
inline std::string to_csv(const ResultsTable& t)
{
    std::ostringstream out;
    out << "row_label,M,mean,std,repeats\n";
    for (const auto& r : t.rows)
        out << r.label << ',' << r.M << ',' << csv::format_double(r.mean) << ',' << csv::format_double(r.std) << ','
            << r.repeats << '\n';
    return out.str();
}

/*
 * Aligned text table, one block per M ("Train-M"), accuracies in percent
 * as mean +- population std.
 */
inline std::string to_text(const ResultsTable& t, const std::string& method = "MFEDCH")
{
    std::ostringstream out;
    std::size_t width = 4;
    for (const auto& r : t.rows) width = std::max(width, r.label.size());
    out << "accuracy (%) as mean +- population std over " << t.repeats << " repeats\n";
    std::optional<Index> current;
    for (const auto& r : t.rows) {
        if (!current || *current != r.M) {
            current = r.M;
            out << "\nTrain-" << r.M << '\n';
            out << std::string(width, ' ').replace(0, 4, "View") << "  " << method << '\n';
        }
        std::string label = r.label;
        label.resize(width, ' ');
        out << label << "  " << format_fixed(100.0 * r.mean, 2) << " +- " << format_fixed(100.0 * r.std, 2);
        if (r.d > 0) out << "  (d=" << r.d << ')';
        out << '\n';
    }
    return out.str();
}

inline const ResultRow& find_row(const ResultsTable& t, const std::string& label, Index M)
{
    for (const auto& r : t.rows)
        if (r.label == label && r.M == M) return r;
    fail(ErrorKind::usage, "no row '" + label + "' for M=" + std::to_string(M));
}

} // namespace mfedch
