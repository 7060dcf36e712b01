#pragma once
#include <mfedch/config.hpp>
#include <mfedch/dataset.hpp>
#include <mfedch/diagnostics.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/evaluation.hpp>
#include <mfedch/gradients.hpp>
#include <mfedch/model_io.hpp>
#include <mfedch/trainer.hpp>
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mfedch {
namespace cli {

struct Streams
{
    std::ostream& out;
    std::ostream& err;
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path);
    if (!f) fail(ErrorKind::usage, "cannot write '" + path.string() + "'");
    f << text;
}

// run.json: the subcommand, its arguments and the fully resolved config.
inline void write_run_json(const std::filesystem::path& dir, const std::string& command, const Json& args,
                           const RunConfig& c)
{
    std::filesystem::create_directories(dir);
    const Json run{{"command", command}, {"arguments", args}, {"config", to_json(c)}};
    write_text(dir / "run.json", run.dump(2) + "\n");
}

inline RunConfig resolve(const std::string& config_path, const std::vector<std::string>& overrides)
{
    if (config_path.empty()) return parse_config_json(Json::object(), overrides);
    return parse_config(config_path, overrides);
}

inline std::vector<std::string> view_names(const RunConfig& c, Index V)
{
    if (c.dataset && !c.dataset->names.empty()) return c.dataset->names;
    std::vector<std::string> names;
    for (Index m = 0; m < V; ++m) names.push_back("view" + std::to_string(m));
    return names;
}

inline void write_table(const std::filesystem::path& dir, const std::string& stem, const ResultsTable& t,
                        const RunConfig& c, const std::string& method)
{
    for (const auto& f : c.output.formats) {
        if (f == "csv") write_text(dir / (stem + ".csv"), to_csv(t));
        if (f == "text") write_text(dir / (stem + ".txt"), to_text(t, method));
    }
}

inline void dump_state(const std::filesystem::path& dir, const TrainState& st)
{
    std::filesystem::create_directories(dir);
    for (Index m = 0; m < st.P.num_views(); ++m) {
        csv::write_matrix((dir / ("P_" + std::to_string(m) + ".csv")).string(), st.P.block(m));
        csv::write_matrix((dir / ("W_" + std::to_string(m) + ".csv")).string(), st.W.W[m]);
    }
    write_loss_history((dir / "loss_history.csv").string(), st.loss_history);
}

inline int cmd_synth(const RunConfig& c, const std::string& out_dir, const Json& args, Streams io)
{
    RunConfig resolved = c;
    if (!resolved.dataset) resolved.dataset = DatasetSpec{};
    if (!resolved.dataset->synth) {
        if (!resolved.dataset->views.empty())
            fail(ErrorKind::config, "synth needs a 'dataset.synth' section, not view files");
        resolved.dataset->synth = SynthSpec{};
    }
    const auto ds = load_dataset(resolved);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> paths;
    for (Index m = 0; m < ds.num_views(); ++m) paths.push_back((fs::path(out_dir) / ("view_" + std::to_string(m) + ".csv")).string());
    save_views(ds, paths, (fs::path(out_dir) / "labels.csv").string());
    write_run_json(out_dir, "synth", args, resolved);
    io.out << "wrote " << ds.num_views() << " views x " << ds.num_samples() << " samples to " << out_dir << '\n';
    return 0;
}

inline int cmd_train(const RunConfig& c, const std::string& out_dir, const Json& args, Streams io)
{
    const auto ds = load_dataset(c);
    namespace fs = std::filesystem;
    write_run_json(out_dir, "train", args, c);
    try {
        const auto r = fit(ds, c.hyper, c.train.seed, c.train.options);
        save_model(r.model, out_dir);
        write_loss_history((fs::path(out_dir) / "loss_history.csv").string(), r.state.loss_history);
        io.out << "iterations " << r.model.iterations << (r.model.converged ? " (converged)" : " (iteration cap)")
               << ", loss " << csv::format_double(r.state.loss_history.front()) << " -> "
               << csv::format_double(r.model.final_loss) << '\n';
    } catch (const TrainingAborted& e) {
        dump_state(fs::path(out_dir) / "aborted_state", e.state());
        throw;
    }
    return 0;
}

inline int cmd_eval(const RunConfig& c, const std::string& out_dir, const std::string& model_dir, bool baseline,
                    const Json& args, Streams io)
{
    const auto ds = load_dataset(c);
    ExperimentOptions opts;
    opts.view_names = view_names(c, ds.num_views());
    opts.train = c.train.options;
    if (!model_dir.empty()) opts.fixed_model = load_model(model_dir);
    write_run_json(out_dir, "eval", args, c);

    // A fixed model uses its own d; d_sweep only applies when fitting per repeat.
    const auto& sweep = opts.fixed_model ? std::vector<Index>{} : c.experiment.d_sweep;
    for (auto d : sweep) {
        Hyperparams h = c.hyper;
        h.d = d;
        validate(h, ds.view_dims());
    }
    ResultsTable table;
    for (auto M : c.experiment.M)
        append(table, run_experiment_sweep(ds, c.hyper, M, c.experiment.repeats, c.experiment.base_seed, sweep, opts));
    write_table(out_dir, "results", table, c, "MFEDCH");
    io.out << to_text(table, "MFEDCH");

    if (baseline) {
        ResultsTable raw;
        for (auto M : c.experiment.M)
            append(raw, run_raw_baseline(ds, M, c.experiment.repeats, c.experiment.base_seed, opts));
        write_table(out_dir, "baseline", raw, c, "raw");
        io.out << '\n' << to_text(raw, "raw");
    }
    return 0;
}

inline int cmd_gradcheck(const RunConfig& c, const std::string& out_dir, const Json& args, Streams io)
{
    const auto& g = c.gradcheck;
    const auto runs = run_gradcheck_suite(g.instances, g.seed, c.hyper, g.step, g.randomize);
    std::string table = "seed,views,samples,d,max_rel_err,worst_block,worst_view,worst_column,worst_row\n";
    double worst = 0.0;
    for (const auto& r : runs) {
        const auto& w = r.report.worst_coordinate;
        table += std::to_string(r.seed) + ',' + std::to_string(r.num_views) + ',' + std::to_string(r.num_samples) +
                 ',' + std::to_string(r.embed_dim) + ',' + csv::format_double(r.report.max_rel_err) + ',' + w.block +
                 ',' + std::to_string(w.view) + ',' + std::to_string(w.column) + ',' + std::to_string(w.row) + '\n';
        worst = std::max(worst, r.report.max_rel_err);
    }
    if (!out_dir.empty()) {
        write_run_json(out_dir, "gradcheck", args, c);
        write_text(std::filesystem::path(out_dir) / "gradcheck.csv", table);
    }
    io.out << table;
    const bool pass = worst <= g.max_rel_err;
    io.out << "max_rel_err " << csv::format_double(worst) << (pass ? " <= " : " > ")
           << csv::format_double(g.max_rel_err) << '\n';
    if (!pass)
        fail(ErrorKind::numeric, "gradient check failed: max_rel_err " + csv::format_double(worst) + " > " +
                                     csv::format_double(g.max_rel_err));
    return 0;
}

inline int cmd_diagnose(const RunConfig& c, const std::string& out_dir, const Json& args, Streams io)
{
    auto rows = diagnostics::identity_rows(diagnostics::run_identity_sweep(c.diagnose.trials, c.diagnose.seed));
    // The alignment gain is reported but is an observation of the run, not a contract.
    std::size_t contract_rows = rows.size();
    if (c.dataset) {
        const auto ds = load_dataset(c);
        const auto init = init_state(ds, c.hyper, c.train.seed, c.train.options);
        const auto r = fit(ds, c.hyper, c.train.seed, c.train.options);
        const auto trained = diagnostics::trained_rows(r.state.W, embed(r.state.P, ds));
        rows.insert(rows.end(), trained.begin(), trained.end());
        contract_rows = rows.size();
        const double gain =
            diagnostics::cross_view_alignment(r.state.W) - diagnostics::cross_view_alignment(init.W);
        rows.push_back({"cross_view_alignment_gain", gain, 0.0, gain > 0.0});
    }
    std::string table = "check,value,bound,pass\n";
    bool all = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& row = rows[k];
        table += row.check + ',' + csv::format_double(row.value) + ',' + csv::format_double(row.bound) + ',' +
                 (row.pass ? "1" : "0") + '\n';
        if (k < contract_rows) all = all && row.pass;
    }
    if (!out_dir.empty()) {
        write_run_json(out_dir, "diagnose", args, c);
        write_text(std::filesystem::path(out_dir) / "diagnostics.csv", table);
    }
    io.out << table;
    if (!all) fail(ErrorKind::numeric, "diagnostics outside contract");
    return 0;
}

inline std::string one_line(std::string s)
{
    for (auto& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

/*
 * Entry point. Errors print one line "mfedch: <kind>: <message>" on the
 * error stream and map to exit codes 1 (usage/config), 2 (data), 3 (numeric).
 */
inline int run(int argc, const char* const* argv, Streams io)
{
    CLI::App app{"Multi-view feature extraction with dual contrastive learning", "mfedch"};
    app.require_subcommand(1);

    std::string config_path, out_dir, model_dir;
    std::vector<std::string> overrides;
    bool baseline = false;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config,-c", config_path, "JSON run configuration");
        if (config_required) opt->required();
        sub->add_option("--set", overrides, "override a config value, e.g. --set hyper.lambda=2")
            ->take_all()
            ->allow_extra_args(false);
    };

    auto* synth = app.add_subcommand("synth", "write synthetic blobs as CSV");
    common(synth, false);
    synth->add_option("--out,-o", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "fit a model");
    common(train, true);
    train->add_option("--out,-o", out_dir, "model directory")->required();

    auto* eval = app.add_subcommand("eval", "repeated-split 1-NN evaluation");
    common(eval, true);
    eval->add_option("--model,-m", model_dir, "evaluate this trained model instead of fitting per repeat");
    eval->add_option("--out,-o", out_dir, "output directory (default: output.directory)");
    eval->add_flag("--baseline", baseline, "also evaluate raw features");

    auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs central-difference gradients");
    common(gradcheck, false);
    gradcheck->add_option("--out,-o", out_dir, "write gradcheck.csv and run.json here");

    auto* diagnose = app.add_subcommand("diagnose", "algebraic identity checks");
    common(diagnose, false);
    diagnose->add_option("--out,-o", out_dir, "write diagnostics.csv and run.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        io.out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        io.out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        io.err << "mfedch: usage_error: " << one_line(e.what()) << '\n';
        return 1;
    }

    try {
        const RunConfig c = resolve(config_path, overrides);
        Json args{{"config", config_path}, {"set", overrides}, {"out", out_dir}};
        if (eval->parsed()) {
            args["model"] = model_dir;
            args["baseline"] = baseline;
            return cmd_eval(c, out_dir.empty() ? c.output.directory : out_dir, model_dir, baseline, args, io);
        }
        if (synth->parsed()) return cmd_synth(c, out_dir, args, io);
        if (train->parsed()) return cmd_train(c, out_dir, args, io);
        if (gradcheck->parsed()) return cmd_gradcheck(c, out_dir, args, io);
        return cmd_diagnose(c, out_dir, args, io);
    } catch (const Error& e) {
        io.err << "mfedch: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        io.err << "mfedch: io_error: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        io.err << "mfedch: error: " << one_line(e.what()) << '\n';
        return 2;
    }
}

} // namespace cli
} // namespace mfedch
