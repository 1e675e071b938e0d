#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uapforge/attacks.hpp"
#include "uapforge/data.hpp"
#include "uapforge/model.hpp"
#include "uapforge/train.hpp"

namespace uapforge {

// Metrics of one (model, data, perturbation) triple. Classes absent from the
// labels have a NaN entry in per_class_rca and are left out of bca.
struct EvalReport {
    double rca = 0.0;
    double bca = 0.0;
    std::vector<double> per_class_rca;
    double asr = 0.0;
    std::optional<double> target_rate;
    double spr_db = 0.0;  // +inf when nothing is added
    std::size_t n = 0;
};

struct ClassAccuracy {
    double rca = 0.0;
    double bca = 0.0;
    std::vector<double> per_class_rca;
};

ClassAccuracy rca_bca(std::span<const int> predictions, std::span<const int> labels, std::size_t num_classes);

// Fraction of perturbed predictions that differ from the clean prediction of
// the same trial. True labels are never read.
double asr(const ModelParams& params, const TrialSet& clean, const Uap& uap, const PlacementPolicy& policy);

double target_rate(const ModelParams& params, const TrialSet& set, const Uap& uap, int target_class,
                   const PlacementPolicy& policy);

// 10 log10(mean_i |x_i|^2 / |v_i|^2) with v_i the perturbation actually added
// to trial i. Placement does not change |v_i|, so no policy is needed.
double spr_db(const TrialSet& clean, const Uap& uap);

// x + xi * clamp(z, -1, 1) with z ~ N(0, 1) drawn per entry.
TrialSet noise_baseline(const TrialSet& set, double xi, std::uint64_t seed);

// Clean-baseline report (no perturbation).
EvalReport evaluate_clean(const ModelParams& params, const TrialSet& set);

// Report of the perturbed set. RCA/BCA average over every placement the
// policy produces; target_rate is filled only when target_class is given.
EvalReport evaluate_uap(const ModelParams& params, const TrialSet& set, const Uap& uap,
                        const PlacementPolicy& policy, std::optional<int> target_class = std::nullopt);

// Report of the model on an already perturbed copy of `clean` (same order).
EvalReport evaluate_perturbed_set(const ModelParams& params, const TrialSet& clean, const TrialSet& perturbed);

enum class CraftMethod { DeepFoolUap, Tlm };

// Gray-box attack: fit a substitute on train/val, craft against it, and
// report the victim on `test`.
EvalReport substitute_transfer(const TrialSet& train, const TrialSet& val, const TrialSet& test,
                               const ModelSpec& substitute_spec, const TrainConfig& substitute_training,
                               const ModelParams& victim, const AttackConfig& config,
                               CraftMethod method = CraftMethod::Tlm);

// Same, with substitute parameters supplied instead of trained.
EvalReport substitute_transfer(const TrialSet& train, const TrialSet& val, const TrialSet& test,
                               const ModelParams& substitute, const ModelParams& victim, const AttackConfig& config,
                               CraftMethod method = CraftMethod::Tlm);

// ---------------------------------------------------------------------------
// Experiment runner

enum class AttackMethod { Noise, DeepFoolUap, Tlm, GrayBox };

struct AttackSpec {
    std::string name;
    AttackMethod method = AttackMethod::Tlm;
    UapMode mode = UapMode::Full;
    std::size_t mini_channels = 0;  // Mini only
    std::size_t mini_samples = 0;
    std::optional<int> target_class;
    ConstraintKind constraint = ConstraintKind::None;
    double alpha = 0.0;
    // GrayBox: substitute architecture and how its UAP is crafted.
    ModelKind substitute = ModelKind::Affine;
    CraftMethod substitute_method = CraftMethod::Tlm;
};

struct ExperimentDescriptor {
    std::string dataset = "synthetic";
    SynthConfig data;
    SplitKind split = SplitKind::LeaveOneSubjectOut;
    // LOSO: held-out subjects (empty = every subject). Within-subject: folds (empty = all 5).
    std::vector<int> folds;
    ModelKind victim = ModelKind::SmallCnn;
    TrainConfig training;
    // Base crafting configuration; xi is replaced by xi_scale * train std.
    AttackConfig attack = AttackConfig::tlm_defaults();
    AttackConfig df_attack = AttackConfig::df_defaults();
    double xi_scale = 0.2;
    std::size_t placements = 30;
    std::vector<AttackSpec> attacks;
    std::uint64_t seed = 0;
};

struct ReportRow {
    std::string cell;
    std::string dataset;
    std::string split;
    std::string victim;
    std::string attack;
    EvalReport report;
};

// Clean row first, then one row per attack, each averaged over folds.
std::vector<ReportRow> run_experiment(const ExperimentDescriptor& descriptor);

// Mean of reports from several folds; n is summed.
EvalReport mean_report(std::span<const EvalReport> reports);

std::string report_csv(std::span<const ReportRow> rows);
std::string report_json(std::span<const ReportRow> rows);
void write_report(std::span<const ReportRow> rows, const std::filesystem::path& csv_path);

std::string to_string(SplitKind kind);
std::string to_string(AttackMethod method);

}  // namespace uapforge
