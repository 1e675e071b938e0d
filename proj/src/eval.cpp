#include "uapforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <random>
#include <sstream>

#include "uapforge/errors.hpp"
#include "uapforge/seed.hpp"

namespace uapforge {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

ClassAccuracy rca_bca(std::span<const int> predictions, std::span<const int> labels, std::size_t num_classes) {
    if (predictions.empty()) throw ValueError("rca_bca: no predictions");
    if (predictions.size() != labels.size())
        throw ShapeError("rca_bca: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
    std::vector<std::size_t> total(num_classes, 0), correct(num_classes, 0);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw ValueError("rca_bca: label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) +
                             ")");
        ++total[y];
        if (predictions[i] == y) {
            ++correct[y];
            ++hits;
        }
    }
    ClassAccuracy out;
    out.rca = static_cast<double>(hits) / static_cast<double>(labels.size());
    out.per_class_rca.assign(num_classes, kNaN);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (total[k] == 0) continue;
        out.per_class_rca[k] = static_cast<double>(correct[k]) / static_cast<double>(total[k]);
        sum += out.per_class_rca[k];
        ++present;
    }
    out.bca = sum / static_cast<double>(present);
    return out;
}

double asr(const ModelParams& params, const TrialSet& clean, const Uap& uap, const PlacementPolicy& policy) {
    if (clean.empty()) throw ValueError("asr: empty trial set");
    const auto reference = predict_labels(params, clean.trials);
    const auto preds = perturbed_predictions(params, clean, uap, policy);
    std::size_t flipped = 0;
    for (const auto& p : preds) flipped += p.label != reference[p.trial];
    return static_cast<double>(flipped) / static_cast<double>(preds.size());
}

double target_rate(const ModelParams& params, const TrialSet& set, const Uap& uap, int target_class,
                   const PlacementPolicy& policy) {
    if (set.empty()) throw ValueError("target_rate: empty trial set");
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= params.spec.num_classes)
        throw ValueError("target class " + std::to_string(target_class) + " outside [0, " +
                         std::to_string(params.spec.num_classes) + ")");
    const auto preds = perturbed_predictions(params, set, uap, policy);
    std::size_t hits = 0;
    for (const auto& p : preds) hits += p.label == target_class;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double spr_db(const TrialSet& clean, const Uap& uap) {
    if (clean.empty()) throw ValueError("spr_db: empty trial set");
    double added = squared_norm(uap.values.values());
    if (uap.mode == UapMode::ChannelInvariant) added *= static_cast<double>(clean.channels());
    if (added == 0.0) return kInf;
    double ratio = 0.0;
    for (const auto& x : clean.trials) ratio += squared_norm(x.values()) / added;
    return 10.0 * std::log10(ratio / static_cast<double>(clean.size()));
}

TrialSet noise_baseline(const TrialSet& set, double xi, std::uint64_t seed) {
    if (!(xi > 0.0)) throw ValueError("noise baseline: xi must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TrialSet out = set;
    for (auto& trial : out.trials)
        for (auto& v : trial.values()) v += xi * std::clamp(gauss(rng), -1.0, 1.0);
    return out;
}

EvalReport evaluate_clean(const ModelParams& params, const TrialSet& set) {
    if (set.empty()) throw ValueError("evaluate: empty trial set");
    const auto predicted = predict_labels(params, set.trials);
    const auto acc = rca_bca(predicted, set.labels, params.spec.num_classes);
    return EvalReport{acc.rca, acc.bca, acc.per_class_rca, 0.0, std::nullopt, kInf, set.size()};
}

EvalReport evaluate_uap(const ModelParams& params, const TrialSet& set, const Uap& uap,
                        const PlacementPolicy& policy, std::optional<int> target_class) {
    if (set.empty()) throw ValueError("evaluate: empty trial set");
    const auto reference = predict_labels(params, set.trials);
    const auto preds = perturbed_predictions(params, set, uap, policy);
    std::vector<int> predicted, labels;
    predicted.reserve(preds.size());
    labels.reserve(preds.size());
    std::size_t flipped = 0, on_target = 0;
    for (const auto& p : preds) {
        predicted.push_back(p.label);
        labels.push_back(set.labels[p.trial]);
        flipped += p.label != reference[p.trial];
        if (target_class) on_target += p.label == *target_class;
    }
    const auto acc = rca_bca(predicted, labels, params.spec.num_classes);
    EvalReport r{acc.rca, acc.bca, acc.per_class_rca, 0.0, std::nullopt, spr_db(set, uap), set.size()};
    const auto count = static_cast<double>(preds.size());
    r.asr = static_cast<double>(flipped) / count;
    if (target_class) {
        if (*target_class < 0 || static_cast<std::size_t>(*target_class) >= params.spec.num_classes)
            throw ValueError("target class " + std::to_string(*target_class) + " out of range");
        r.target_rate = static_cast<double>(on_target) / count;
    }
    return r;
}

EvalReport evaluate_perturbed_set(const ModelParams& params, const TrialSet& clean, const TrialSet& perturbed) {
    if (clean.size() != perturbed.size()) throw ShapeError("perturbed set differs in size from the clean set");
    if (clean.empty()) throw ValueError("evaluate: empty trial set");
    const auto reference = predict_labels(params, clean.trials);
    const auto predicted = predict_labels(params, perturbed.trials);
    const auto acc = rca_bca(predicted, clean.labels, params.spec.num_classes);
    std::size_t flipped = 0;
    double ratio = 0.0;
    bool all_zero = true;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        flipped += predicted[i] != reference[i];
        double d = 0.0;
        const auto a = clean.trials[i].values();
        const auto b = perturbed.trials[i].values();
        for (std::size_t k = 0; k < a.size(); ++k) d += (b[k] - a[k]) * (b[k] - a[k]);
        if (d > 0.0) {
            all_zero = false;
            ratio += squared_norm(a) / d;
        }
    }
    const double n = static_cast<double>(clean.size());
    const double spr = all_zero ? kInf : 10.0 * std::log10(ratio / n);
    return EvalReport{acc.rca, acc.bca, acc.per_class_rca, static_cast<double>(flipped) / n, std::nullopt, spr,
                      clean.size()};
}

namespace {

AttackResult craft(const ModelParams& model, const TrialSet& train, const TrialSet& val, const AttackConfig& config,
                   CraftMethod method) {
    if (method == CraftMethod::DeepFoolUap) return df_uap(model, train, config);
    return tlm_uap(model, train, val, config, UapMode::Full);
}

std::optional<int> target_of(const AttackConfig& config) {
    if (config.kind == AttackKind::Target) return config.target_class;
    return std::nullopt;
}

}  // namespace

EvalReport substitute_transfer(const TrialSet& train, const TrialSet& val, const TrialSet& test,
                               const ModelSpec& substitute_spec, const TrainConfig& substitute_training,
                               const ModelParams& victim, const AttackConfig& config, CraftMethod method) {
    if (substitute_spec.input_channels != victim.spec.input_channels ||
        substitute_spec.input_samples != victim.spec.input_samples)
        throw ShapeError("substitute and victim take different input shapes");
    const auto substitute = fit_victim(substitute_spec, train, val, substitute_training).params;
    return substitute_transfer(train, val, test, substitute, victim, config, method);
}

EvalReport substitute_transfer(const TrialSet& train, const TrialSet& val, const TrialSet& test,
                               const ModelParams& substitute, const ModelParams& victim, const AttackConfig& config,
                               CraftMethod method) {
    if (substitute.spec.input_channels != victim.spec.input_channels ||
        substitute.spec.input_samples != victim.spec.input_samples)
        throw ShapeError("substitute and victim take different input shapes");
    const auto crafted = craft(substitute, train, val, config, method);
    return evaluate_uap(victim, test, crafted.uap, PlacementPolicy::at({}), target_of(config));
}

// ---------------------------------------------------------------------------

std::string to_string(SplitKind kind) {
    return kind == SplitKind::LeaveOneSubjectOut ? "loso" : "within-subject";
}

std::string to_string(AttackMethod method) {
    switch (method) {
        case AttackMethod::Noise: return "noise";
        case AttackMethod::DeepFoolUap: return "df-uap";
        case AttackMethod::Tlm: return "tlm";
        case AttackMethod::GrayBox: return "gray-box";
    }
    return "?";
}

EvalReport mean_report(std::span<const EvalReport> reports) {
    if (reports.empty()) throw ValueError("mean_report: nothing to average");
    EvalReport out;
    const std::size_t K = reports.front().per_class_rca.size();
    out.per_class_rca.assign(K, 0.0);
    std::vector<std::size_t> class_count(K, 0);
    double target_sum = 0.0, spr_sum = 0.0;
    std::size_t target_count = 0;
    bool spr_infinite = false;
    for (const auto& r : reports) {
        out.rca += r.rca;
        out.bca += r.bca;
        out.asr += r.asr;
        out.n += r.n;
        for (std::size_t k = 0; k < K && k < r.per_class_rca.size(); ++k)
            if (!std::isnan(r.per_class_rca[k])) {
                out.per_class_rca[k] += r.per_class_rca[k];
                ++class_count[k];
            }
        if (r.target_rate) {
            target_sum += *r.target_rate;
            ++target_count;
        }
        if (std::isinf(r.spr_db)) spr_infinite = true;
        spr_sum += r.spr_db;
    }
    const double m = static_cast<double>(reports.size());
    out.rca /= m;
    out.bca /= m;
    out.asr /= m;
    for (std::size_t k = 0; k < K; ++k)
        out.per_class_rca[k] = class_count[k] ? out.per_class_rca[k] / static_cast<double>(class_count[k]) : kNaN;
    if (target_count) out.target_rate = target_sum / static_cast<double>(target_count);
    out.spr_db = spr_infinite ? kInf : spr_sum / m;
    return out;
}

namespace {

// Re-raises an exception with the failing cell named, keeping its category.
[[noreturn]] void rethrow_in_cell(const std::string& cell) {
    try {
        throw;
    } catch (const ShapeError& e) {
        throw ShapeError(cell + ": " + e.what());
    } catch (const ValueError& e) {
        throw ValueError(cell + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(cell + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(cell + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(cell + ": " + e.what());
    }
}

ModelSpec spec_for(ModelKind kind, const TrialSet& set) {
    return kind == ModelKind::Affine ? ModelSpec::affine(set.channels(), set.samples(), set.num_classes())
                                     : ModelSpec::small_cnn(set.channels(), set.samples(), set.num_classes());
}

EvalReport run_attack(const AttackSpec& spec, const ExperimentDescriptor& d, const Split& split,
                      const ModelParams& victim, double xi, std::uint64_t seed) {
    const PlacementPolicy eval_policy = PlacementPolicy::random(d.placements, derive_seed(seed, 9));
    switch (spec.method) {
        case AttackMethod::Noise:
            return evaluate_perturbed_set(victim, split.test, noise_baseline(split.test, xi, seed));
        case AttackMethod::DeepFoolUap: {
            AttackConfig cfg = d.df_attack;
            cfg.xi = xi;
            cfg.seed = seed;
            const auto result = df_uap(victim, split.train, cfg);
            return evaluate_uap(victim, split.test, result.uap, eval_policy);
        }
        case AttackMethod::Tlm: {
            AttackConfig cfg = d.attack;
            cfg.xi = xi;
            cfg.seed = seed;
            cfg.constraint = spec.constraint;
            cfg.alpha = spec.alpha;
            if (spec.target_class) {
                cfg.kind = AttackKind::Target;
                cfg.target_class = *spec.target_class;
            }
            const auto result =
                spec.mode == UapMode::Mini
                    ? craft_mini_uap(victim, split.train, split.val, cfg, spec.mini_channels, spec.mini_samples)
                    : tlm_uap(victim, split.train, split.val, cfg, spec.mode);
            return evaluate_uap(victim, split.test, result.uap, eval_policy, spec.target_class);
        }
        case AttackMethod::GrayBox: {
            AttackConfig cfg = spec.substitute_method == CraftMethod::DeepFoolUap ? d.df_attack : d.attack;
            cfg.xi = xi;
            cfg.seed = seed;
            if (spec.target_class) {
                cfg.kind = AttackKind::Target;
                cfg.target_class = *spec.target_class;
            }
            TrainConfig training = d.training;
            training.seed = derive_seed(seed, 8);
            return substitute_transfer(split.train, split.val, split.test, spec_for(spec.substitute, split.train),
                                       training, victim, cfg, spec.substitute_method);
        }
    }
    throw ValueError("unknown attack method");
}

}  // namespace

std::vector<ReportRow> run_experiment(const ExperimentDescriptor& d) {
    const TrialSet set = gen_synthetic(d.data);
    std::vector<int> folds = d.folds;
    SplitPlan plan;
    if (d.split == SplitKind::LeaveOneSubjectOut) {
        if (folds.empty()) folds = subject_ids(set);
    } else {
        plan = within_subject_blocks(set);
        if (folds.empty())
            for (int f = 0; f < kWithinSubjectBlocks; ++f) folds.push_back(f);
    }

    const std::string victim_name = to_string(d.victim);
    std::vector<std::vector<EvalReport>> per_cell(d.attacks.size() + 1);
    for (std::size_t fi = 0; fi < folds.size(); ++fi) {
        const std::uint64_t fold_seed = derive_seed(d.seed, fi);
        const std::string fold_name = to_string(d.split) + " fold " + std::to_string(folds[fi]);
        Split split;
        ModelParams victim;
        double xi = 0.0;
        try {
            split = d.split == SplitKind::LeaveOneSubjectOut ? loso_split(set, folds[fi], derive_seed(fold_seed, 1))
                                                            : within_subject_fold(set, plan, folds[fi]);
            TrainConfig training = d.training;
            training.seed = derive_seed(fold_seed, 2);
            victim = fit_victim(spec_for(d.victim, set), split.train, split.val, training).params;
            xi = d.xi_scale * entry_stddev(split.train);
            per_cell[0].push_back(evaluate_clean(victim, split.test));
        } catch (...) {
            rethrow_in_cell(victim_name + "/clean, " + fold_name);
        }
        for (std::size_t ai = 0; ai < d.attacks.size(); ++ai) {
            try {
                per_cell[ai + 1].push_back(
                    run_attack(d.attacks[ai], d, split, victim, xi, derive_seed(fold_seed, 100 + ai)));
            } catch (...) {
                rethrow_in_cell(victim_name + "/" + d.attacks[ai].name + ", " + fold_name);
            }
        }
    }

    std::vector<ReportRow> rows;
    for (std::size_t c = 0; c < per_cell.size(); ++c)
        rows.push_back(ReportRow{std::to_string(c), d.dataset, to_string(d.split), victim_name,
                                 c == 0 ? "clean" : d.attacks[c - 1].name, mean_report(per_cell[c])});
    return rows;
}

// ---------------------------------------------------------------------------
// Report files

namespace {

std::string fixed6(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

nlohmann::ordered_json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

std::string report_csv(std::span<const ReportRow> rows) {
    std::ostringstream out;
    out << "cell,dataset,split,victim,attack,rca,bca,asr,target_rate,spr_db,n\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out << row.cell << ',' << row.dataset << ',' << row.split << ',' << row.victim << ',' << row.attack << ','
            << fixed6(r.rca) << ',' << fixed6(r.bca) << ',' << fixed6(r.asr) << ','
            << fixed6(r.target_rate.value_or(kNaN)) << ',' << fixed6(r.spr_db) << ',' << r.n << '\n';
    }
    return out.str();
}

std::string report_json(std::span<const ReportRow> rows) {
    auto doc = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        const auto& r = row.report;
        nlohmann::ordered_json per_class = nlohmann::ordered_json::array();
        for (double v : r.per_class_rca) per_class.push_back(number_or_null(v));
        doc.push_back({{"cell", row.cell},
                       {"dataset", row.dataset},
                       {"split", row.split},
                       {"victim", row.victim},
                       {"attack", row.attack},
                       {"rca", r.rca},
                       {"bca", r.bca},
                       {"per_class_rca", per_class},
                       {"asr", r.asr},
                       {"target_rate", r.target_rate ? nlohmann::ordered_json(*r.target_rate) : nullptr},
                       {"spr_db", number_or_null(r.spr_db)},
                       {"spr_infinite", std::isinf(r.spr_db)},
                       {"n", r.n}});
    }
    return doc.dump(2) + "\n";
}

void write_report(std::span<const ReportRow> rows, const std::filesystem::path& csv_path) {
    auto json_path = csv_path;
    json_path.replace_extension(".json");
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    csv << report_csv(rows);
    std::ofstream json(json_path, std::ios::binary);
    if (!json) throw std::runtime_error("cannot write " + json_path.string());
    json << report_json(rows);
}

}  // namespace uapforge
