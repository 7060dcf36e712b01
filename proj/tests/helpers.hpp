#pragma once
#include <mfedch/dataset.hpp>
#include <mfedch/losses.hpp>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>
#include <unistd.h>

namespace testing_support {

using mfedch::Index;
using mfedch::Matrix;

inline Matrix gaussian(std::mt19937_64& gen, Index rows, Index cols, double scale = 1.0)
{
    std::normal_distribution<double> N(0.0, scale);
    Matrix M(rows, cols);
    for (Index c = 0; c < cols; ++c)
        for (Index r = 0; r < rows; ++r) M(r, c) = N(gen);
    return M;
}

struct Instance
{
    mfedch::MultiViewDataset ds;
    mfedch::ProjectionStack P;
    mfedch::CoefficientSet W;
};

// Random (X, P, W) with the given sizes.
inline Instance random_instance(std::uint64_t seed, Index V, Index n, const std::vector<Index>& dims, Index d)
{
    std::mt19937_64 gen(seed);
    Instance inst;
    for (Index m = 0; m < V; ++m) inst.ds.views.push_back(gaussian(gen, dims[m], n));
    inst.P = mfedch::ProjectionStack::zeros(dims, d);
    inst.P.P = gaussian(gen, inst.P.P.rows(), d, 0.5);
    for (Index m = 0; m < V; ++m) inst.W.W.push_back(gaussian(gen, n, n, 1.0 / std::sqrt(double(n))));
    return inst;
}

class TempDir
{
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mfedch_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testing_support
