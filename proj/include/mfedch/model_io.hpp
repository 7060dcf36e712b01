#pragma once
#include <mfedch/config.hpp>
#include <mfedch/csv.hpp>
#include <mfedch/errors.hpp>
#include <mfedch/trainer.hpp>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace mfedch {

/*
 * Model directory layout:
 *     manifest.json   hyperparameters, seed, run metadata, one entry per view
 *     P_<m>.csv       D_m x d projection, %.17g (round-trips exactly)
 */
inline void save_model(const Model& model, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Json views = Json::array();
    for (std::size_t m = 0; m < model.projections.size(); ++m) {
        const std::string file = "P_" + std::to_string(m) + ".csv";
        csv::write_matrix((fs::path(dir) / file).string(), model.projections[m]);
        views.push_back(Json{{"file", file},
                             {"rows", model.projections[m].rows()},
                             {"cols", model.projections[m].cols()}});
    }
    const Json manifest{{"format", "mfedch-model"},
                        {"version", 1},
                        {"views", views},
                        {"hyper", to_json(model.hyper)},
                        {"seed", model.seed},
                        {"iterations", model.iterations},
                        {"final_loss", model.final_loss},
                        {"converged", model.converged},
                        {"wall_seconds", model.wall_seconds}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) fail(ErrorKind::usage, "cannot write manifest in '" + dir + "'");
    out << manifest.dump(2) << '\n';
}

inline Model load_model(const std::string& dir)
{
    namespace fs = std::filesystem;
    const auto path = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(path);
    if (!in) fail(ErrorKind::parse, "cannot open model manifest '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::parse, "invalid JSON in '" + path + "': " + e.what());
    }
    Model model;
    try {
        if (j.at("format").get<std::string>() != "mfedch-model")
            fail(ErrorKind::parse, "'" + path + "' is not a model manifest");
        model.hyper = hyper_from_json(j.at("hyper"), "manifest.hyper");
        model.seed = j.at("seed").get<std::uint64_t>();
        model.iterations = j.at("iterations").get<long>();
        model.final_loss = j.at("final_loss").get<double>();
        model.converged = j.at("converged").get<bool>();
        model.wall_seconds = j.at("wall_seconds").get<double>();
        for (const auto& v : j.at("views")) {
            Matrix P = csv::read_matrix((fs::path(dir) / v.at("file").get<std::string>()).string());
            if (P.rows() != v.at("rows").get<Index>() || P.cols() != v.at("cols").get<Index>())
                fail(ErrorKind::shape, "projection '" + v.at("file").get<std::string>() +
                                           "' does not match the shape in the manifest");
            model.projections.push_back(std::move(P));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, "malformed manifest '" + path + "': " + e.what());
    }
    if (model.projections.empty()) fail(ErrorKind::parse, "manifest '" + path + "' lists no views");
    for (const auto& P : model.projections)
        if (P.cols() != model.projections.front().cols())
            fail(ErrorKind::shape, "projections in '" + dir + "' disagree on d");
    return model;
}

// iteration,loss
inline void write_loss_history(const std::string& path, const std::vector<double>& history)
{
    std::ofstream out(path);
    if (!out) fail(ErrorKind::usage, "cannot write '" + path + "'");
    out << "iteration,loss\n";
    for (std::size_t t = 0; t < history.size(); ++t) out << t << ',' << csv::format_double(history[t]) << '\n';
}

} // namespace mfedch
