#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uapforge/model.hpp"
#include "uapforge/trial.hpp"

namespace uapforge {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// First/second moment estimates for one flat variable.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

// One bias-corrected Adam update of `variable` in place.
void adam_step(std::span<double> variable, std::span<const double> gradient, AdamState& state,
               const AdamConfig& config);

enum class ClassWeighting { Inverse, Uniform };

struct TrainConfig {
    AdamConfig adam;
    std::size_t max_epochs = 200;
    std::size_t batch_size = 32;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    ClassWeighting class_weighting = ClassWeighting::Inverse;

    void validate() const;
};

struct FitReport {
    std::size_t epochs_run = 0;
    double best_validation_loss = 0.0;
    std::vector<double> training_curve;    // mean training loss per epoch
    std::vector<double> validation_curve;  // validation loss per epoch
    bool stopped_early = false;
};

// Per-class weights proportional to the inverse class frequency in `labels`,
// rescaled so the present classes average 1. Absent classes get weight 0.
std::vector<double> inverse_proportion_weights(std::span<const int> labels, std::size_t num_classes);

std::vector<double> class_weights(std::span<const int> labels, std::size_t num_classes, ClassWeighting rule);

struct FitResult {
    ModelParams params;
    FitReport report;
};

// Mini-batch Adam on the class-weighted cross entropy with early stopping on
// validation loss. Returns the parameters of the best validation epoch.
FitResult fit_victim(const ModelSpec& spec, const TrialSet& train, const TrialSet& val, const TrainConfig& config);

// Same loop starting from given parameters instead of init_params(spec, seed).
FitResult fit_from(ModelParams initial, const TrialSet& train, const TrialSet& val, const TrainConfig& config);

}  // namespace uapforge
