#include "uapforge/trial.hpp"

#include <cmath>

#include "uapforge/errors.hpp"

namespace uapforge {

TrialMatrix::TrialMatrix(std::size_t channels, std::size_t samples, double fill)
    : channels_(channels), samples_(samples), values_(channels * samples, fill) {
    if (channels == 0 || samples == 0) throw ShapeError("trial needs at least one channel and one sample");
}

TrialMatrix::TrialMatrix(std::size_t channels, std::size_t samples, std::vector<double> values)
    : channels_(channels), samples_(samples), values_(std::move(values)) {
    if (channels == 0 || samples == 0) throw ShapeError("trial needs at least one channel and one sample");
    if (values_.size() != channels * samples)
        throw ShapeError("trial values: expected " + std::to_string(channels * samples) + " entries, got " +
                         std::to_string(values_.size()));
}

void TrialSet::validate() const {
    if (labels.size() != trials.size() || subjects.size() != trials.size())
        throw ShapeError("trial set: trials, labels and subjects differ in length");
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (!trials[i].same_shape(trials.front()))
            throw ShapeError("trial set: trial " + std::to_string(i) + " has a different shape");
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size())
            throw ValueError("trial set: label " + std::to_string(labels[i]) + " of trial " + std::to_string(i) +
                             " is outside [0, " + std::to_string(class_names.size()) + ")");
    }
}

TrialSet TrialSet::subset(std::span<const std::size_t> indices) const {
    TrialSet out;
    out.class_names = class_names;
    out.trials.reserve(indices.size());
    out.labels.reserve(indices.size());
    out.subjects.reserve(indices.size());
    for (auto i : indices) {
        out.trials.push_back(trials.at(i));
        out.labels.push_back(labels.at(i));
        out.subjects.push_back(subjects.at(i));
    }
    return out;
}

double entry_stddev(const TrialSet& set) {
    double sum = 0.0;
    double count = 0.0;
    for (const auto& trial : set.trials)
        for (double v : trial.values()) sum += v, count += 1.0;
    if (count == 0.0) return 0.0;
    const double mean = sum / count;
    double acc = 0.0;
    for (const auto& trial : set.trials)
        for (double v : trial.values()) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / count);
}

}  // namespace uapforge
