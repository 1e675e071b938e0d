#include <doctest.h>

#include <cmath>

#include "uapforge/data.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/eval.hpp"
#include "uapforge/train.hpp"

using namespace uapforge;

TEST_CASE("adam_step: first step moves each coordinate by about the learning rate against the gradient") {
    AdamConfig cfg;
    std::vector<double> x{1.0, -2.0, 0.5};
    const std::vector<double> g{3.0, -0.01, 250.0};
    AdamState state(3);
    adam_step(x, g, state, cfg);
    // m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps).
    CHECK(x[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(x[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
    CHECK(x[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
    CHECK(state.step == 1);
}

TEST_CASE("adam_step: zero gradient never moves the variable") {
    std::vector<double> x{0.25, -4.0};
    const std::vector<double> g{0.0, 0.0};
    AdamState state(2);
    for (int i = 0; i < 100; ++i) adam_step(x, g, state, AdamConfig{});
    CHECK(x == std::vector<double>{0.25, -4.0});
}

TEST_CASE("adam_step: trajectories are reproducible and shapes are checked") {
    auto run = [] {
        std::vector<double> x{1.0, 2.0};
        AdamState state(2);
        for (int i = 0; i < 50; ++i) {
            const std::vector<double> g{std::sin(x[0] * 3.0), x[1] - 0.5};
            adam_step(x, g, state, AdamConfig{});
        }
        return x;
    };
    CHECK(run() == run());
    std::vector<double> x{1.0};
    AdamState state(2);
    const std::vector<double> g{1.0};
    CHECK_THROWS_AS(adam_step(x, g, state, AdamConfig{}), ShapeError);
}

TEST_CASE("AdamConfig and TrainConfig validation") {
    AdamConfig a;
    a.beta1 = 1.0;
    CHECK_THROWS(a.validate());
    TrainConfig t;
    t.patience = 0;
    CHECK_THROWS_AS(t.validate(), ValueError);
}

TEST_CASE("inverse_proportion_weights: 90/10 split gives (0.2, 1.8)") {
    std::vector<int> labels(100, 0);
    for (int i = 90; i < 100; ++i) labels[i] = 1;
    const auto w = inverse_proportion_weights(labels, 2);
    // (1/0.9, 1/0.1) = (1.111, 10) with mean 5.5556 -> divide by it.
    CHECK(w[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.8).epsilon(1e-12));
    CHECK(w[1] / w[0] == doctest::Approx(9.0).epsilon(1e-12));
    CHECK((w[0] + w[1]) / 2.0 == doctest::Approx(1.0));
}

TEST_CASE("inverse_proportion_weights: absent classes get zero and the rest average one") {
    const std::vector<int> labels{0, 0, 2, 2, 2, 2};
    const auto w = inverse_proportion_weights(labels, 3);
    CHECK(w[1] == 0.0);
    CHECK((w[0] + w[2]) / 2.0 == doctest::Approx(1.0));
    CHECK(w[0] / w[2] == doctest::Approx(2.0));
    const auto u = class_weights(labels, 3, ClassWeighting::Uniform);
    CHECK(u == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("fit_victim: affine victim separates the default synthetic data") {
    const auto set = gen_synthetic(SynthConfig{});
    const auto split = loso_split(set, 3, 0);
    TrainConfig cfg;
    cfg.seed = 1;
    const auto fit = fit_victim(ModelSpec::affine(8, 64, 2), split.train, split.val, cfg);
    CHECK(evaluate_clean(fit.params, split.val).rca >= 0.9);
}

TEST_CASE("fit_victim: patience 1 stops one epoch after validation loss starts rising") {
    // Training pushes toward class 0, validation only contains class 1, so the
    // validation loss rises from the first epoch on.
    TrialSet train, val;
    train.class_names = val.class_names = {"a", "b"};
    for (int i = 0; i < 8; ++i) {
        train.trials.emplace_back(1, 2, 1.0);
        train.labels.push_back(0);
        train.subjects.push_back(0);
    }
    val.trials.emplace_back(1, 2, 1.0);
    val.labels.push_back(1);
    val.subjects.push_back(0);
    TrainConfig cfg;
    cfg.patience = 1;
    cfg.class_weighting = ClassWeighting::Uniform;
    const auto fit = fit_victim(ModelSpec::affine(1, 2, 2), train, val, cfg);
    CHECK(fit.report.stopped_early);
    CHECK(fit.report.epochs_run == 2);
    CHECK(fit.report.training_curve.size() == fit.report.epochs_run);
}

TEST_CASE("fit_victim: returned parameters have the lowest validation loss seen") {
    const auto set = gen_synthetic(SynthConfig{});
    const auto split = loso_split(set, 0, 4);
    TrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.seed = 5;
    const auto fit = fit_victim(ModelSpec::small_cnn(8, 64, 2), split.train, split.val, cfg);
    const auto& curve = fit.report.validation_curve;
    CHECK(fit.report.best_validation_loss == *std::min_element(curve.begin(), curve.end()));
    const auto w = class_weights(split.train.labels, 2, cfg.class_weighting);
    CHECK(weighted_cross_entropy(fit.params, split.val.trials, split.val.labels, w) ==
          fit.report.best_validation_loss);
}

TEST_CASE("fit_victim: same inputs and seed give identical results") {
    const auto set = gen_synthetic(SynthConfig{});
    const auto split = loso_split(set, 1, 2);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.seed = 9;
    const auto a = fit_victim(ModelSpec::small_cnn(8, 64, 2), split.train, split.val, cfg);
    const auto b = fit_victim(ModelSpec::small_cnn(8, 64, 2), split.train, split.val, cfg);
    CHECK(a.params == b.params);
    CHECK(a.report.training_curve == b.report.training_curve);
    CHECK(a.report.validation_curve == b.report.validation_curve);
}

TEST_CASE("fit_victim: empty or mismatched sets are rejected") {
    const auto set = gen_synthetic(SynthConfig{});
    const auto split = loso_split(set, 3, 0);
    TrialSet empty;
    CHECK_THROWS_AS(fit_victim(ModelSpec::affine(8, 64, 2), empty, split.val, TrainConfig{}), ValueError);
    CHECK_THROWS_AS(fit_victim(ModelSpec::affine(4, 64, 2), split.train, split.val, TrainConfig{}), ShapeError);
}
