#pragma once
#include <mfedch/dataset.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/hyperparams.hpp>
#include <mfedch/trainer.hpp>
#include <json.hpp>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mfedch {

using Json = nlohmann::ordered_json;

struct SynthSpec
{
    Index views = 2;
    Index classes = 3;
    Index per_class = 10;
    std::vector<Index> dims{8, 8};
    double noise_sigma = 0.5;
    double center_scale = 3.0;
    std::uint64_t seed = 0;
};

struct DatasetSpec
{
    std::vector<std::string> views; // sample-major CSV per view
    std::optional<std::string> labels;
    std::optional<SynthSpec> synth;
    std::vector<std::string> names;
    bool standardize = false;
};

struct TrainSpec
{
    std::uint64_t seed = 0;
    TrainOptions options;
};

struct ExperimentSpec
{
    std::vector<Index> M{4, 6, 8};
    Index repeats = 5;
    std::uint64_t base_seed = 0;
    std::vector<Index> d_sweep; // empty: use hyper.d
};

struct GradcheckSpec
{
    Index instances = 20;
    std::uint64_t seed = 0;
    double step = 1e-6;
    bool randomize = true;
    double max_rel_err = 1e-4;
};

struct DiagnoseSpec
{
    Index trials = 100;
    std::uint64_t seed = 0;
};

struct OutputSpec
{
    std::string directory = "out";
    std::vector<std::string> formats{"csv", "text"};
};

struct RunConfig
{
    std::optional<DatasetSpec> dataset;
    Hyperparams hyper;
    TrainSpec train;
    ExperimentSpec experiment;
    GradcheckSpec gradcheck;
    DiagnoseSpec diagnose;
    OutputSpec output;
};

namespace detail {

class Section
{
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) fail(ErrorKind::config, "'" + path_ + "' must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).template get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::config, "'" + name(key) + "' has the wrong type");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const Json& at(const char* key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void reject_unknown() const
    {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) fail(ErrorKind::config, "unknown key '" + name(item.key()) + "'");
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require_at_least(long long value, long long bound, const std::string& field)
{
    if (value < bound)
        fail(ErrorKind::config, field + " must be >= " + std::to_string(bound) + ", got " + std::to_string(value));
}

} // namespace detail

inline Json to_json(const Hyperparams& h)
{
    return Json{{"d", h.d},          {"lambda", h.lambda}, {"alpha", h.alpha},       {"beta", h.beta},
                {"tau1", h.tau1},    {"tau2", h.tau2},     {"gamma", h.gamma},       {"beta1", h.b1},
                {"beta2", h.b2},     {"eps", h.eps_adam},  {"norm_eps", h.norm_eps}, {"tol", h.tol},
                {"max_iters", h.max_iters}};
}

inline Hyperparams hyper_from_json(const Json& j, const std::string& path = "hyper")
{
    Hyperparams h;
    detail::Section s(j, path);
    s.get("d", h.d);
    s.get("lambda", h.lambda);
    s.get("alpha", h.alpha);
    s.get("beta", h.beta);
    s.get("tau1", h.tau1);
    s.get("tau2", h.tau2);
    s.get("gamma", h.gamma);
    s.get("beta1", h.b1);
    s.get("beta2", h.b2);
    s.get("eps", h.eps_adam);
    s.get("norm_eps", h.norm_eps);
    s.get("tol", h.tol);
    s.get("max_iters", h.max_iters);
    s.reject_unknown();
    return h;
}

inline std::string to_string(SweepMode m) { return m == SweepMode::jacobi ? "jacobi" : "gauss_seidel"; }
inline std::string to_string(WInit w) { return w == WInit::uniform ? "uniform" : "jittered"; }

inline Json to_json(const RunConfig& c)
{
    Json out;
    if (c.dataset) {
        const auto& d = *c.dataset;
        Json ds;
        if (d.synth) {
            const auto& s = *d.synth;
            ds["synth"] = Json{{"views", s.views},         {"classes", s.classes},
                               {"per_class", s.per_class}, {"dims", s.dims},
                               {"noise_sigma", s.noise_sigma}, {"center_scale", s.center_scale},
                               {"seed", s.seed}};
        } else {
            ds["views"] = d.views;
            if (d.labels) ds["labels"] = *d.labels;
        }
        ds["names"] = d.names;
        ds["standardize"] = d.standardize;
        out["dataset"] = ds;
    }
    out["hyper"] = to_json(c.hyper);
    out["train"] = Json{{"seed", c.train.seed},
                        {"sweep", to_string(c.train.options.mode)},
                        {"w_init", to_string(c.train.options.w_init)},
                        {"w_jitter", c.train.options.w_jitter}};
    out["experiment"] = Json{{"M", c.experiment.M},
                             {"repeats", c.experiment.repeats},
                             {"base_seed", c.experiment.base_seed},
                             {"d_sweep", c.experiment.d_sweep}};
    out["gradcheck"] = Json{{"instances", c.gradcheck.instances},
                            {"seed", c.gradcheck.seed},
                            {"step", c.gradcheck.step},
                            {"randomize", c.gradcheck.randomize},
                            {"max_rel_err", c.gradcheck.max_rel_err}};
    out["diagnose"] = Json{{"trials", c.diagnose.trials}, {"seed", c.diagnose.seed}};
    out["output"] = Json{{"directory", c.output.directory}, {"formats", c.output.formats}};
    return out;
}

inline RunConfig config_from_json(const Json& root)
{
    RunConfig c;
    detail::Section top(root, "");

    if (top.has("dataset")) {
        DatasetSpec d;
        detail::Section s(top.at("dataset"), "dataset");
        const bool has_files = s.has("views") || s.has("labels");
        if (has_files && s.has("synth"))
            fail(ErrorKind::config, "dataset: 'views'/'labels' and 'synth' are mutually exclusive");
        if (!has_files && !s.has("synth")) fail(ErrorKind::config, "dataset: need either 'views' or 'synth'");
        s.get("views", d.views);
        std::string labels;
        if (s.has("labels")) {
            s.get("labels", labels);
            d.labels = labels;
        }
        if (has_files && d.views.size() < 2) fail(ErrorKind::config, "dataset.views must list at least 2 files");
        if (s.has("synth")) {
            SynthSpec sy;
            detail::Section ss(s.at("synth"), "dataset.synth");
            ss.get("views", sy.views);
            ss.get("classes", sy.classes);
            ss.get("per_class", sy.per_class);
            ss.get("dims", sy.dims);
            ss.get("noise_sigma", sy.noise_sigma);
            ss.get("center_scale", sy.center_scale);
            ss.get("seed", sy.seed);
            ss.reject_unknown();
            detail::require_at_least(sy.views, 2, "dataset.synth.views");
            detail::require_at_least(sy.classes, 1, "dataset.synth.classes");
            detail::require_at_least(sy.per_class, 1, "dataset.synth.per_class");
            if (!ss.has("dims")) sy.dims.assign(static_cast<std::size_t>(sy.views), 8);
            if (static_cast<Index>(sy.dims.size()) != sy.views)
                fail(ErrorKind::config, "dataset.synth.dims must have one entry per view");
            if (!(sy.noise_sigma >= 0.0)) fail(ErrorKind::config, "dataset.synth.noise_sigma must be >= 0");
            d.synth = sy;
        }
        s.get("names", d.names);
        s.get("standardize", d.standardize);
        s.reject_unknown();
        c.dataset = d;
    }

    if (top.has("hyper")) c.hyper = hyper_from_json(top.at("hyper"));
    validate(c.hyper);

    if (top.has("train")) {
        detail::Section s(top.at("train"), "train");
        s.get("seed", c.train.seed);
        std::string sweep = to_string(c.train.options.mode), init = to_string(c.train.options.w_init);
        s.get("sweep", sweep);
        s.get("w_init", init);
        s.get("w_jitter", c.train.options.w_jitter);
        s.reject_unknown();
        if (sweep == "gauss_seidel") c.train.options.mode = SweepMode::gauss_seidel;
        else if (sweep == "jacobi") c.train.options.mode = SweepMode::jacobi;
        else fail(ErrorKind::config, "train.sweep must be 'gauss_seidel' or 'jacobi', got '" + sweep + "'");
        if (init == "uniform") c.train.options.w_init = WInit::uniform;
        else if (init == "jittered") c.train.options.w_init = WInit::jittered;
        else fail(ErrorKind::config, "train.w_init must be 'uniform' or 'jittered', got '" + init + "'");
        if (!(c.train.options.w_jitter >= 0.0)) fail(ErrorKind::config, "train.w_jitter must be >= 0");
    }

    if (top.has("experiment")) {
        detail::Section s(top.at("experiment"), "experiment");
        // M may be a single integer or a list.
        if (s.has("M") && s.at("M").is_number_integer()) c.experiment.M = {s.at("M").get<Index>()};
        else s.get("M", c.experiment.M);
        s.get("repeats", c.experiment.repeats);
        s.get("base_seed", c.experiment.base_seed);
        s.get("d_sweep", c.experiment.d_sweep);
        s.reject_unknown();
        if (c.experiment.M.empty()) fail(ErrorKind::config, "experiment.M must not be empty");
        for (auto m : c.experiment.M) detail::require_at_least(m, 1, "experiment.M");
        detail::require_at_least(c.experiment.repeats, 1, "experiment.repeats");
        for (auto d : c.experiment.d_sweep) detail::require_at_least(d, 1, "experiment.d_sweep");
    }

    if (top.has("gradcheck")) {
        detail::Section s(top.at("gradcheck"), "gradcheck");
        s.get("instances", c.gradcheck.instances);
        s.get("seed", c.gradcheck.seed);
        s.get("step", c.gradcheck.step);
        s.get("randomize", c.gradcheck.randomize);
        s.get("max_rel_err", c.gradcheck.max_rel_err);
        s.reject_unknown();
        detail::require_at_least(c.gradcheck.instances, 1, "gradcheck.instances");
        if (!(c.gradcheck.step > 0.0)) fail(ErrorKind::config, "gradcheck.step must be > 0");
        if (!(c.gradcheck.max_rel_err > 0.0)) fail(ErrorKind::config, "gradcheck.max_rel_err must be > 0");
    }

    if (top.has("diagnose")) {
        detail::Section s(top.at("diagnose"), "diagnose");
        s.get("trials", c.diagnose.trials);
        s.get("seed", c.diagnose.seed);
        s.reject_unknown();
        detail::require_at_least(c.diagnose.trials, 1, "diagnose.trials");
    }

    if (top.has("output")) {
        detail::Section s(top.at("output"), "output");
        s.get("directory", c.output.directory);
        s.get("formats", c.output.formats);
        s.reject_unknown();
        for (const auto& f : c.output.formats)
            if (f != "csv" && f != "text") fail(ErrorKind::config, "output.formats: unknown format '" + f + "'");
    }

    top.reject_unknown();
    return c;
}

inline Json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::config, "invalid JSON in '" + path + "': " + e.what());
    }
}

/*
 * Applies "section.key=value" overrides in place. The value is parsed as
 * JSON when possible and kept as a string otherwise.
 */
inline void apply_override(Json& root, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        fail(ErrorKind::usage, "override '" + assignment + "' is not of the form key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }
    Json* node = &root;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) {
        if (part.empty()) fail(ErrorKind::usage, "override key '" + key + "' has an empty component");
        path.push_back(part);
    }
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        if (!node->is_object()) fail(ErrorKind::config, "override '" + key + "' walks into a non-object");
        node = &(*node)[path[k]];
        if (node->is_null()) *node = Json::object();
    }
    if (!node->is_object()) fail(ErrorKind::config, "override '" + key + "' walks into a non-object");
    (*node)[path.back()] = value;
}

inline RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {})
{
    Json root = read_json(path);
    for (const auto& o : overrides) apply_override(root, o);
    return config_from_json(root);
}

inline RunConfig parse_config_json(Json root, const std::vector<std::string>& overrides = {})
{
    for (const auto& o : overrides) apply_override(root, o);
    return config_from_json(root);
}

// Loads or generates the configured dataset and validates it.
inline MultiViewDataset load_dataset(const RunConfig& c)
{
    if (!c.dataset) fail(ErrorKind::config, "config has no 'dataset' section");
    const auto& d = *c.dataset;
    MultiViewDataset ds;
    if (d.synth) {
        const auto& s = *d.synth;
        ds = synth_blobs(s.views, s.classes, s.per_class, s.dims, s.noise_sigma, s.seed, s.center_scale);
    } else {
        ds = load_views(d.views, d.labels);
    }
    validate(ds);
    if (!d.names.empty() && static_cast<Index>(d.names.size()) != ds.num_views())
        fail(ErrorKind::config, "dataset.names has " + std::to_string(d.names.size()) + " entries for " +
                                    std::to_string(ds.num_views()) + " views");
    if (d.standardize) ds = standardize(ds);
    validate(c.hyper, ds.view_dims());
    return ds;
}

} // namespace mfedch
