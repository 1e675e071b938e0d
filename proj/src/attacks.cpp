#include "uapforge/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/seed.hpp"
#include "uapforge/train.hpp"

namespace uapforge {

std::string to_string(UapMode mode) {
    switch (mode) {
        case UapMode::Full: return "full";
        case UapMode::ChannelInvariant: return "channel-invariant";
        case UapMode::Mini: return "mini";
    }
    return "?";
}

std::string to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::None: return "none";
        case ConstraintKind::L1: return "l1";
        case ConstraintKind::L2: return "l2";
    }
    return "?";
}

Uap Uap::zeros(UapMode mode, std::size_t channels, std::size_t samples, double xi, NormOrder norm) {
    if (mode == UapMode::ChannelInvariant) channels = 1;
    return Uap{mode, TrialMatrix(channels, samples), xi, norm};
}

AttackConfig AttackConfig::tlm_defaults() { return AttackConfig{}; }

AttackConfig AttackConfig::df_defaults() {
    AttackConfig c;
    c.delta = 0.8;
    c.max_iter = 10;
    return c;
}

void AttackConfig::validate(std::size_t num_classes) const {
    if (!(xi > 0.0)) throw ValueError("xi must be positive");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ValueError("delta must lie in [0, 1]");
    if (max_iter < 1) throw ValueError("max_iter must be at least 1");
    if (alpha < 0.0) throw ValueError("alpha must be non-negative");
    if (batch_size < 1) throw ValueError("batch size must be at least 1");
    if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
    if (patience < 1) throw ValueError("patience must be at least 1");
    if (overshoot < 0.0) throw ValueError("overshoot must be non-negative");
    if (kind == AttackKind::Target && (target_class < 0 || static_cast<std::size_t>(target_class) >= num_classes))
        throw ValueError("target class " + std::to_string(target_class) + " outside [0, " +
                         std::to_string(num_classes) + ")");
}

// ---------------------------------------------------------------------------
// Norms, projection, losses, penalties

double norm(std::span<const double> v, NormOrder p) {
    if (p == NormOrder::Linf) {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void project_in_place(std::span<double> v, NormOrder p, double xi) {
    if (!(xi > 0.0)) throw ValueError("projection radius must be positive");
    if (p == NormOrder::Linf) {
        for (auto& x : v) x = std::clamp(x, -xi, xi);
        return;
    }
    const double n = norm(v, NormOrder::L2);
    if (n <= xi) return;
    const double scale = xi / n;
    for (auto& x : v) x *= scale;
    // Rounding can leave the rescaled vector a hair outside; shrink by a few
    // ulps until it is inside, so projecting again is a no-op.
    for (double again = norm(v, NormOrder::L2); again > xi; again = norm(v, NormOrder::L2))
        for (auto& x : v) x *= (xi / again) * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
}

TrialMatrix project(const TrialMatrix& v, NormOrder p, double xi) {
    TrialMatrix out = v;
    project_in_place(out.values(), p, xi);
    return out;
}

double attack_loss(const ModelParams& params, const TrialMatrix& perturbed, AttackKind kind, int label) {
    const auto objective =
        kind == AttackKind::NonTarget ? InputObjective::log_prob(label) : InputObjective::neg_log_prob(label);
    return objective_value(params, perturbed, objective);
}

double constraint_penalty(std::span<const double> v, ConstraintKind kind) {
    double s = 0.0;
    switch (kind) {
        case ConstraintKind::None: return 0.0;
        case ConstraintKind::L1:
            for (double x : v) s += std::abs(x);
            return s;
        case ConstraintKind::L2:
            for (double x : v) s += x * x;
            return s;
    }
    return s;
}

std::vector<double> constraint_gradient(std::span<const double> v, ConstraintKind kind) {
    std::vector<double> g(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (kind == ConstraintKind::L1)
            g[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
        else if (kind == ConstraintKind::L2)
            g[i] = 2.0 * v[i];
    }
    return g;
}

std::vector<int> reference_labels(const ModelParams& params, const TrialSet& set, LabelSource source) {
    if (source == LabelSource::True) return set.labels;
    return predict_labels(params, set.trials);
}

// ---------------------------------------------------------------------------
// DeepFool

DeepFoolResult deepfool(const ModelParams& params, const TrialMatrix& trial, double overshoot,
                        std::size_t max_iter) {
    const std::size_t K = params.spec.num_classes;
    DeepFoolResult out;
    out.perturbation = TrialMatrix(trial.channels(), trial.samples());
    auto jac = logit_jacobian(params, trial);
    const int original = argmax(jac.logits);
    out.original_label = original;
    out.final_label = original;

    TrialMatrix total(trial.channels(), trial.samples());
    TrialMatrix x = trial;
    std::vector<double> w(trial.size());
    std::vector<double> best_w(trial.size());
    while (out.iterations < max_iter) {
        if (out.iterations > 0) {
            jac = logit_jacobian(params, x);
            out.final_label = argmax(jac.logits);
            if (out.final_label != original) break;
        }
        // Closest linearized boundary among f_j - f_original, j != original.
        double best_ratio = std::numeric_limits<double>::infinity();
        double best_margin = 0.0, best_norm2 = 0.0;
        const auto g0 = jac.rows[original].values();
        for (std::size_t j = 0; j < K; ++j) {
            if (static_cast<int>(j) == original) continue;
            const auto gj = jac.rows[j].values();
            double n2 = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = gj[i] - g0[i];
                n2 += w[i] * w[i];
            }
            const double margin = jac.logits[j] - jac.logits[original];
            const double n = std::sqrt(n2);
            if (n < 1e-12) {
                if (K == 2) throw NumericalError("deepfool: degenerate gradient (norm below 1e-12)");
                continue;
            }
            const double ratio = std::abs(margin) / n;
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best_margin = margin;
                best_norm2 = n2;
                best_w = w;
            }
        }
        if (!std::isfinite(best_ratio)) throw NumericalError("deepfool: degenerate gradient (norm below 1e-12)");
        // Step r = -(g / |grad g|^2) grad g for the margin g = f_l - f_original.
        const double step = -best_margin / best_norm2;
        auto tv = total.values();
        for (std::size_t i = 0; i < tv.size(); ++i) tv[i] += step * best_w[i];
        auto xv = x.values();
        const auto x0 = trial.values();
        for (std::size_t i = 0; i < xv.size(); ++i) xv[i] = x0[i] + (1.0 + overshoot) * tv[i];
        ++out.iterations;
    }
    if (out.iterations == max_iter && out.iterations > 0) out.final_label = predict_label(params, x);
    auto pv = out.perturbation.values();
    const auto tv = total.values();
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = (1.0 + overshoot) * tv[i];
    return out;
}

// ---------------------------------------------------------------------------
// Applying a UAP

void check_placement(const Uap& uap, std::size_t channels, std::size_t samples, const Placement& placement) {
    const auto& v = uap.values;
    switch (uap.mode) {
        case UapMode::Full:
            if (v.channels() != channels || v.samples() != samples)
                throw ShapeError("full UAP is " + std::to_string(v.channels()) + "x" + std::to_string(v.samples()) +
                                 ", trial is " + std::to_string(channels) + "x" + std::to_string(samples));
            return;
        case UapMode::ChannelInvariant:
            if (v.channels() != 1 || v.samples() != samples)
                throw ShapeError("channel-invariant UAP must be 1x" + std::to_string(samples));
            return;
        case UapMode::Mini:
            if (v.channels() > channels || v.samples() > samples)
                throw ShapeError("mini UAP template is larger than the trial");
            if (placement.channel_offset > channels - v.channels() || placement.time_offset > samples - v.samples())
                throw ValueError("mini UAP placement (" + std::to_string(placement.channel_offset) + ", " +
                                 std::to_string(placement.time_offset) + ") leaves the trial");
            return;
    }
}

TrialMatrix apply_uap(const TrialMatrix& trial, const Uap& uap, const Placement& placement) {
    check_placement(uap, trial.channels(), trial.samples(), placement);
    TrialMatrix out = trial;
    const auto& v = uap.values;
    switch (uap.mode) {
        case UapMode::Full: {
            auto o = out.values();
            auto a = v.values();
            for (std::size_t i = 0; i < o.size(); ++i) o[i] += a[i];
            break;
        }
        case UapMode::ChannelInvariant: {
            auto r = v.row(0);
            for (std::size_t c = 0; c < out.channels(); ++c) {
                auto o = out.row(c);
                for (std::size_t t = 0; t < o.size(); ++t) o[t] += r[t];
            }
            break;
        }
        case UapMode::Mini:
            for (std::size_t c = 0; c < v.channels(); ++c)
                for (std::size_t t = 0; t < v.samples(); ++t)
                    out(placement.channel_offset + c, placement.time_offset + t) += v(c, t);
            break;
    }
    return out;
}

void accumulate_uap_gradient(const TrialMatrix& g, const Uap& uap, const Placement& placement, double scale,
                             std::span<double> out) {
    const auto& v = uap.values;
    if (out.size() != v.size()) throw ShapeError("UAP gradient buffer has the wrong size");
    switch (uap.mode) {
        case UapMode::Full: {
            auto gv = g.values();
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * gv[i];
            break;
        }
        case UapMode::ChannelInvariant:
            for (std::size_t c = 0; c < g.channels(); ++c) {
                auto r = g.row(c);
                for (std::size_t t = 0; t < r.size(); ++t) out[t] += scale * r[t];
            }
            break;
        case UapMode::Mini:
            for (std::size_t c = 0; c < v.channels(); ++c)
                for (std::size_t t = 0; t < v.samples(); ++t)
                    out[c * v.samples() + t] += scale * g(placement.channel_offset + c, placement.time_offset + t);
            break;
    }
}

Placement random_placement(const Uap& uap, std::size_t channels, std::size_t samples, std::mt19937_64& rng) {
    if (uap.mode != UapMode::Mini) return {};
    std::uniform_int_distribution<std::size_t> ch(0, channels - uap.values.channels());
    std::uniform_int_distribution<std::size_t> tm(0, samples - uap.values.samples());
    Placement p;
    p.channel_offset = ch(rng);
    p.time_offset = tm(rng);
    return p;
}

std::vector<PerturbedPrediction> perturbed_predictions(const ModelParams& params, const TrialSet& set,
                                                       const Uap& uap, const PlacementPolicy& policy) {
    std::vector<PerturbedPrediction> out;
    if (uap.mode != UapMode::Mini || policy.fixed) {
        const Placement p = policy.fixed.value_or(Placement{});
        out.reserve(set.size());
        for (std::size_t i = 0; i < set.size(); ++i)
            out.push_back({i, predict_label(params, apply_uap(set.trials[i], uap, p))});
        return out;
    }
    if (policy.random_count == 0) throw ValueError("random placement policy needs at least one placement");
    std::mt19937_64 rng(policy.seed);
    out.reserve(set.size() * policy.random_count);
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t r = 0; r < policy.random_count; ++r) {
            const auto p = random_placement(uap, set.channels(), set.samples(), rng);
            out.push_back({i, predict_label(params, apply_uap(set.trials[i], uap, p))});
        }
    return out;
}

// ---------------------------------------------------------------------------
// Crafting

namespace {

void require_shape(const ModelParams& params, const TrialSet& set, const char* what) {
    if (set.empty()) throw ValueError(std::string(what) + " set is empty");
    if (set.channels() != params.spec.input_channels || set.samples() != params.spec.input_samples)
        throw ShapeError(std::string(what) + " trials do not match the model input");
}

// Fraction of perturbed predictions that differ from the clean prediction
// (non-target) or equal the target class.
double success_rate(const std::vector<PerturbedPrediction>& preds, std::span<const int> clean, AttackKind kind,
                    int target) {
    if (preds.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& p : preds)
        hits += kind == AttackKind::NonTarget ? (p.label != clean[p.trial]) : (p.label == target);
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

enum class TrainPlacement { Origin, Fixed, Random };

AttackResult tlm_engine(const ModelParams& params, const TrialSet& train, const TrialSet& val,
                        const AttackConfig& cfg, Uap v, TrainPlacement placement_kind, Placement fixed,
                        const ProjectionHook& hook) {
    cfg.validate(params.spec.num_classes);
    require_shape(params, train, "training");
    require_shape(params, val, "validation");
    const std::size_t C = params.spec.input_channels, T = params.spec.input_samples;
    if (v.mode == UapMode::Mini) check_placement(v, C, T, fixed);

    std::vector<int> labels;
    if (cfg.kind == AttackKind::NonTarget)
        labels = reference_labels(params, train, cfg.label_source);
    else
        labels.assign(train.size(), cfg.target_class);
    const auto val_clean = predict_labels(params, val.trials);

    PlacementPolicy val_policy = PlacementPolicy::at(fixed);
    if (placement_kind == TrainPlacement::Random)
        val_policy = PlacementPolicy::random(cfg.validation_placements, derive_seed(cfg.seed, 3));

    auto order_rng = make_rng(cfg.seed, 1);
    auto place_rng = make_rng(cfg.seed, 2);
    AdamConfig adam;
    adam.learning_rate = cfg.learning_rate;
    AdamState state(v.values.size());

    AttackResult result{v, 0, 0.0, {}};
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(v.values.size());
    std::vector<Placement> placements(train.size(), fixed);
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_iter; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        if (placement_kind == TrainPlacement::Random)
            for (auto& p : placements) p = random_placement(v, C, T, place_rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t i = order[b];
                const auto x = apply_uap(train.trials[i], v, placements[i]);
                const auto objective = cfg.kind == AttackKind::NonTarget ? InputObjective::log_prob(labels[i])
                                                                          : InputObjective::neg_log_prob(labels[i]);
                accumulate_uap_gradient(grad_input(params, x, objective), v, placements[i], scale, grad);
            }
            if (cfg.alpha > 0.0 && cfg.constraint != ConstraintKind::None) {
                const auto pg = constraint_gradient(v.values.values(), cfg.constraint);
                for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += cfg.alpha * pg[k];
            }
            adam_step(v.values.values(), grad, state, adam);
            project_in_place(v.values.values(), cfg.norm, cfg.xi);
            if (hook) hook(v);
        }
        const double metric = success_rate(perturbed_predictions(params, val, v, val_policy), val_clean, cfg.kind,
                                           cfg.target_class);
        result.asr_curve.push_back(metric);
        result.iterations_run = epoch + 1;
        if (metric > result.best_validation_asr) {
            result.best_validation_asr = metric;
            result.uap = v;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (result.best_validation_asr > cfg.delta) break;
        if (since_best >= cfg.patience) break;
    }
    return result;
}

}  // namespace

AttackResult df_uap(const ModelParams& params, const TrialSet& trials, const AttackConfig& cfg,
                    const ProjectionHook& hook) {
    cfg.validate(params.spec.num_classes);
    if (cfg.kind != AttackKind::NonTarget) throw ValueError("DeepFool UAP supports non-target attacks only");
    require_shape(params, trials, "attack");
    const std::size_t C = params.spec.input_channels, T = params.spec.input_samples;
    const auto clean = predict_labels(params, trials.trials);

    Uap v = Uap::zeros(UapMode::Full, C, T, cfg.xi, cfg.norm);
    auto current_asr = [&] {
        std::size_t flipped = 0;
        for (std::size_t i = 0; i < trials.size(); ++i)
            flipped += predict_label(params, apply_uap(trials.trials[i], v)) != clean[i];
        return static_cast<double>(flipped) / static_cast<double>(trials.size());
    };

    AttackResult result{v, 0, 0.0, {}};
    auto order_rng = make_rng(cfg.seed, 1);
    std::vector<std::size_t> order(trials.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double asr = current_asr();
    result.asr_curve.push_back(asr);
    for (std::size_t m = 0; m < cfg.max_iter; ++m) {
        if (asr >= cfg.delta) break;
        std::shuffle(order.begin(), order.end(), order_rng);
        for (auto i : order) {
            const auto x = apply_uap(trials.trials[i], v);
            if (predict_label(params, x) != clean[i]) continue;
            const auto step = deepfool(params, x, cfg.overshoot, cfg.deepfool_max_iter);
            auto vv = v.values.values();
            const auto dv = step.perturbation.values();
            for (std::size_t k = 0; k < vv.size(); ++k) vv[k] += dv[k];
            project_in_place(vv, cfg.norm, cfg.xi);
            if (hook) hook(v);
        }
        ++result.iterations_run;
        asr = current_asr();
        result.asr_curve.push_back(asr);
    }
    result.uap = v;
    result.best_validation_asr = asr;
    return result;
}

AttackResult tlm_uap(const ModelParams& params, const TrialSet& train, const TrialSet& val, const AttackConfig& cfg,
                     UapMode mode, const ProjectionHook& hook) {
    if (mode == UapMode::Mini) throw ValueError("use craft_mini_uap for mini templates");
    const auto v = Uap::zeros(mode, params.spec.input_channels, params.spec.input_samples, cfg.xi, cfg.norm);
    return tlm_engine(params, train, val, cfg, v, TrainPlacement::Origin, {}, hook);
}

AttackResult craft_mini_uap(const ModelParams& params, const TrialSet& train, const TrialSet& val,
                            const AttackConfig& cfg, std::size_t mini_channels, std::size_t mini_samples,
                            const ProjectionHook& hook) {
    if (mini_channels == 0 || mini_samples == 0) throw ShapeError("mini template must be at least 1x1");
    if (mini_channels > params.spec.input_channels || mini_samples > params.spec.input_samples)
        throw ShapeError("mini template is larger than the trial");
    const auto v = Uap::zeros(UapMode::Mini, mini_channels, mini_samples, cfg.xi, cfg.norm);
    return tlm_engine(params, train, val, cfg, v, TrainPlacement::Random, {}, hook);
}

AttackResult craft_mini_uap_fixed(const ModelParams& params, const TrialSet& train, const TrialSet& val,
                                  const AttackConfig& cfg, std::size_t mini_channels, std::size_t mini_samples,
                                  Placement placement, const ProjectionHook& hook) {
    if (mini_channels == 0 || mini_samples == 0) throw ShapeError("mini template must be at least 1x1");
    if (mini_channels > params.spec.input_channels || mini_samples > params.spec.input_samples)
        throw ShapeError("mini template is larger than the trial");
    const auto v = Uap::zeros(UapMode::Mini, mini_channels, mini_samples, cfg.xi, cfg.norm);
    return tlm_engine(params, train, val, cfg, v, TrainPlacement::Fixed, placement, hook);
}

// ---------------------------------------------------------------------------
// Files

void write_uap(const Uap& uap, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("UAPF", 4);
    binio::put_uint<std::uint16_t>(out, 1);
    binio::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(uap.mode));
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(uap.values.channels()));
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(uap.values.samples()));
    binio::put_f64(out, uap.xi);
    binio::put_uint<std::uint8_t>(out, uap.norm == NormOrder::L2 ? 2 : 255);
    for (double v : uap.values.values()) binio::put_f64(out, v);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Uap read_uap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    binio::Reader r(in, path.string());
    r.expect_magic("UAPF");
    if (const auto version = r.uint<std::uint16_t>(); version != 1)
        throw FormatError(path.string() + ": unsupported UAP file version " + std::to_string(version));
    const auto mode = r.uint<std::uint8_t>();
    if (mode > 2) throw FormatError(path.string() + ": unknown UAP mode " + std::to_string(mode));
    const std::size_t C = r.uint<std::uint32_t>();
    const std::size_t T = r.uint<std::uint32_t>();
    if (C == 0 || T == 0) throw FormatError(path.string() + ": empty UAP shape");
    if (mode == 1 && C != 1) throw FormatError(path.string() + ": channel-invariant UAP must have one row");
    Uap uap;
    uap.mode = static_cast<UapMode>(mode);
    uap.xi = r.f64();
    const auto order = r.uint<std::uint8_t>();
    if (order != 2 && order != 255) throw FormatError(path.string() + ": norm order must be 2 or 255");
    uap.norm = order == 2 ? NormOrder::L2 : NormOrder::Linf;
    std::vector<double> values(C * T);
    for (auto& v : values) v = r.f64();
    r.expect_end();
    uap.values = TrialMatrix(C, T, std::move(values));
    return uap;
}

std::string uap_to_csv(const Uap& uap) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (std::size_t c = 0; c < uap.values.channels(); ++c) {
        auto row = uap.values.row(c);
        for (std::size_t t = 0; t < row.size(); ++t) out << (t ? "," : "") << row[t];
        out << '\n';
    }
    return out.str();
}

void export_uap_csv(const Uap& uap, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << uap_to_csv(uap);
}

}  // namespace uapforge
