#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uapforge/model.hpp"
#include "uapforge/trial.hpp"

namespace uapforge {

enum class NormOrder { L2, Linf };
enum class UapMode { Full, ChannelInvariant, Mini };
enum class AttackKind { NonTarget, Target };
enum class ConstraintKind { None, L1, L2 };
enum class LabelSource { True, Predicted };

std::string to_string(UapMode mode);
std::string to_string(ConstraintKind kind);

// A universal perturbation. `values` is C x T (Full), 1 x T (ChannelInvariant)
// or C_m x T_m (Mini).
struct Uap {
    UapMode mode = UapMode::Full;
    TrialMatrix values;
    double xi = 0.2;
    NormOrder norm = NormOrder::Linf;

    static Uap zeros(UapMode mode, std::size_t channels, std::size_t samples, double xi, NormOrder norm);

    friend bool operator==(const Uap&, const Uap&) = default;
};

// Top-left corner of a Mini template inside a trial.
struct Placement {
    std::size_t channel_offset = 0;
    std::size_t time_offset = 0;
};

struct AttackConfig {
    double xi = 0.2;
    double delta = 1.0;
    std::size_t max_iter = 500;
    double alpha = 0.0;
    NormOrder norm = NormOrder::Linf;
    std::size_t batch_size = 32;
    AttackKind kind = AttackKind::NonTarget;
    int target_class = -1;
    ConstraintKind constraint = ConstraintKind::None;
    std::uint64_t seed = 0;
    LabelSource label_source = LabelSource::Predicted;
    // TLM optimizer step size and stall limit on the validation metric.
    double learning_rate = 0.01;
    std::size_t patience = 10;
    // DeepFool inner loop.
    double overshoot = 0.02;
    std::size_t deepfool_max_iter = 50;
    // Mini mode: random placements per validation trial.
    std::size_t validation_placements = 30;

    // TLM: xi 0.2, delta 1.0, 500 epochs, alpha 0, no constraint, predicted labels.
    static AttackConfig tlm_defaults();
    // DeepFool UAP: xi 0.2, delta 0.8, 10 passes.
    static AttackConfig df_defaults();

    void validate(std::size_t num_classes) const;
};

// Crafting output. In target mode the metric fields hold target rates.
struct AttackResult {
    Uap uap;
    std::size_t iterations_run = 0;
    double best_validation_asr = 0.0;
    std::vector<double> asr_curve;
};

// Called with the current perturbation after every projection onto the xi-ball.
using ProjectionHook = std::function<void(const Uap&)>;

double norm(std::span<const double> v, NormOrder p);

// Euclidean-nearest point of the l_p ball of radius xi: entrywise clip for
// l_inf, radial rescale for l_2.
void project_in_place(std::span<double> v, NormOrder p, double xi);
TrialMatrix project(const TrialMatrix& v, NormOrder p, double xi);

// Non-target: log p_y(x). Target: -log p_{y_t}(x). Both floored at kLossLogFloor.
double attack_loss(const ModelParams& params, const TrialMatrix& perturbed, AttackKind kind, int label);

double constraint_penalty(std::span<const double> v, ConstraintKind kind);
// (Sub)gradient of constraint_penalty; sign(0) is taken as 0 for L1.
std::vector<double> constraint_gradient(std::span<const double> v, ConstraintKind kind);

// Labels y used by the non-target loss: the model's clean predictions or the
// recorded labels.
std::vector<int> reference_labels(const ModelParams& params, const TrialSet& set, LabelSource source);

struct DeepFoolResult {
    TrialMatrix perturbation;
    std::size_t iterations = 0;
    int original_label = 0;
    int final_label = 0;
};

// Iterative closest-hyperplane attack on one trial. Throws NumericalError when
// the margin gradient vanishes (norm < 1e-12).
DeepFoolResult deepfool(const ModelParams& params, const TrialMatrix& trial, double overshoot,
                        std::size_t max_iter);

TrialMatrix apply_uap(const TrialMatrix& trial, const Uap& uap, const Placement& placement = {});

// Adjoint of apply_uap: maps a gradient over the whole trial onto the UAP's
// own entries (sum over channels for ChannelInvariant, crop for Mini).
void accumulate_uap_gradient(const TrialMatrix& trial_gradient, const Uap& uap, const Placement& placement,
                             double scale, std::span<double> out);

void check_placement(const Uap& uap, std::size_t channels, std::size_t samples, const Placement& placement);

// How a Mini UAP is positioned during evaluation. Full and ChannelInvariant
// UAPs ignore the policy and are evaluated once per trial.
struct PlacementPolicy {
    std::optional<Placement> fixed;  // set: always use this placement
    std::size_t random_count = 30;   // otherwise: this many uniform placements per trial
    std::uint64_t seed = 0;

    static PlacementPolicy at(Placement p) { return {p, 0, 0}; }
    static PlacementPolicy random(std::size_t count, std::uint64_t seed) { return {std::nullopt, count, seed}; }
};

Placement random_placement(const Uap& uap, std::size_t channels, std::size_t samples, std::mt19937_64& rng);

// Every perturbed prediction an evaluation performs: trial index and label.
struct PerturbedPrediction {
    std::size_t trial = 0;
    int label = 0;
};
std::vector<PerturbedPrediction> perturbed_predictions(const ModelParams& params, const TrialSet& set,
                                                       const Uap& uap, const PlacementPolicy& policy);

// Non-target only: DeepFool increments projected onto the xi-ball,
// visiting trials in a freshly shuffled order each pass.
AttackResult df_uap(const ModelParams& params, const TrialSet& trials, const AttackConfig& config,
                    const ProjectionHook& hook = {});

// Total-loss minimization: Adam on the mean attack loss plus alpha times the
// constraint penalty, projected after every mini-batch, keeping the UAP with
// the best validation ASR (or target rate).
AttackResult tlm_uap(const ModelParams& params, const TrialSet& train, const TrialSet& val,
                     const AttackConfig& config, UapMode mode = UapMode::Full, const ProjectionHook& hook = {});

// TLM with a C_m x T_m template placed uniformly at random per trial and epoch.
AttackResult craft_mini_uap(const ModelParams& params, const TrialSet& train, const TrialSet& val,
                            const AttackConfig& config, std::size_t mini_channels, std::size_t mini_samples,
                            const ProjectionHook& hook = {});

// Mini crafting with every placement pinned; a (C, T) template at (0, 0)
// reproduces tlm_uap exactly.
AttackResult craft_mini_uap_fixed(const ModelParams& params, const TrialSet& train, const TrialSet& val,
                                  const AttackConfig& config, std::size_t mini_channels, std::size_t mini_samples,
                                  Placement placement, const ProjectionHook& hook = {});

// UAP file ("UAPF") and CSV export.
void write_uap(const Uap& uap, const std::filesystem::path& path);
Uap read_uap(const std::filesystem::path& path);
std::string uap_to_csv(const Uap& uap);
void export_uap_csv(const Uap& uap, const std::filesystem::path& path);

}  // namespace uapforge
