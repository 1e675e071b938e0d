#include "uapforge/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "uapforge/errors.hpp"
#include "uapforge/seed.hpp"

namespace uapforge {

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ValueError("Adam betas must lie in (0, 1)");
    if (!(eps > 0.0)) throw ValueError("Adam epsilon must be positive");
}

void TrainConfig::validate() const {
    adam.validate();
    if (patience < 1) throw ValueError("patience must be at least 1");
    if (batch_size < 1) throw ValueError("batch size must be at least 1");
    if (max_epochs < 1) throw ValueError("max_epochs must be at least 1");
}

void adam_step(std::span<double> variable, std::span<const double> gradient, AdamState& state,
               const AdamConfig& config) {
    if (gradient.size() != variable.size() || state.m.size() != variable.size() || state.v.size() != variable.size())
        throw ShapeError("Adam: variable, gradient and state sizes differ");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < variable.size(); ++i) {
        const double g = gradient[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        variable[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

std::vector<double> inverse_proportion_weights(std::span<const int> labels, std::size_t num_classes) {
    std::vector<double> counts(num_classes, 0.0);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw ValueError("label outside class range");
        counts[y] += 1.0;
    }
    const double n = static_cast<double>(labels.size());
    std::vector<double> w(num_classes, 0.0);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (counts[k] == 0.0) continue;
        w[k] = n / counts[k];
        sum += w[k];
        ++present;
    }
    if (present == 0) return w;
    const double mean = sum / static_cast<double>(present);
    for (auto& v : w) v /= mean;
    return w;
}

std::vector<double> class_weights(std::span<const int> labels, std::size_t num_classes, ClassWeighting rule) {
    if (rule == ClassWeighting::Uniform) return std::vector<double>(num_classes, 1.0);
    return inverse_proportion_weights(labels, num_classes);
}

namespace {

void flatten_into(const ModelParams& p, std::vector<double>& out) {
    out.clear();
    for (const auto& a : p.arrays) out.insert(out.end(), a.values.begin(), a.values.end());
}

void unflatten_from(std::span<const double> flat, ModelParams& p) {
    std::size_t offset = 0;
    for (auto& a : p.arrays) {
        std::copy_n(flat.begin() + offset, a.values.size(), a.values.begin());
        offset += a.values.size();
    }
}

}  // namespace

FitResult fit_victim(const ModelSpec& spec, const TrialSet& train, const TrialSet& val, const TrainConfig& config) {
    return fit_from(init_params(spec, config.seed), train, val, config);
}

FitResult fit_from(ModelParams params, const TrialSet& train, const TrialSet& val, const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw ValueError("training set is empty");
    if (val.empty()) throw ValueError("validation set is empty");
    const auto& spec = params.spec;
    for (const TrialSet* set : {&train, &val})
        if (set->channels() != spec.input_channels || set->samples() != spec.input_samples)
            throw ShapeError("trial shape does not match the model input");

    const auto weights = class_weights(train.labels, spec.num_classes, config.class_weighting);
    // Shuffling uses its own stream so the init seed and batch order are independent.
    auto rng = make_rng(config.seed, 1);

    std::vector<double> flat;
    flatten_into(params, flat);
    AdamState state(flat.size());

    FitResult result{params, {}};
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<TrialMatrix> batch;
    std::vector<int> batch_labels;
    std::vector<double> gflat;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(train.trials[order[i]]);
                batch_labels.push_back(train.labels[order[i]]);
            }
            auto step = loss_and_grad(params, batch, batch_labels, weights);
            loss_sum += step.loss;
            flatten_into(step.grad, gflat);
            adam_step(flat, gflat, state, config.adam);
            unflatten_from(flat, params);
            ++batches;
        }
        const double val_loss = weighted_cross_entropy(params, val.trials, val.labels, weights);
        result.report.training_curve.push_back(loss_sum / static_cast<double>(batches));
        result.report.validation_curve.push_back(val_loss);
        result.report.epochs_run = epoch + 1;
        if (val_loss < best) {
            best = val_loss;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.report.stopped_early = true;
            break;
        }
    }
    result.report.best_validation_loss = best;
    return result;
}

}  // namespace uapforge
