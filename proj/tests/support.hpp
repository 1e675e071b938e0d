#pragma once

// Helpers shared by the unit tests and the acceptance runner: random inputs,
// central finite differences, and scratch directories.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uapforge/model.hpp"
#include "uapforge/trial.hpp"

namespace testing_support {

using uapforge::ModelParams;
using uapforge::TrialMatrix;

inline TrialMatrix random_trial(std::size_t C, std::size_t T, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    TrialMatrix x(C, T);
    for (auto& v : x.values()) v = g(rng);
    return x;
}

// Parameters with every entry (biases included) drawn from N(0, scale^2).
inline ModelParams random_params(const uapforge::ModelSpec& spec, std::mt19937_64& rng, double scale) {
    auto p = ModelParams::zeros(spec);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& a : p.arrays)
        for (auto& v : a.values) v = g(rng);
    return p;
}

// |a - b| relative to the larger magnitude, with an absolute floor so
// entries that are zero up to rounding do not dominate.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

template <typename F>
double central_difference(F&& f, double& x, double h = 1e-4) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// A fresh empty directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("uapforge-" + tag + "-" + std::to_string(rd()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing_support
