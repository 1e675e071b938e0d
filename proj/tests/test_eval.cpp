#include <doctest.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "support.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/eval.hpp"

using namespace uapforge;

namespace {

TrialSet one_feature_set(const std::vector<double>& firsts, const std::vector<int>& labels) {
    TrialSet s;
    s.class_names = {"a", "b"};
    for (std::size_t i = 0; i < firsts.size(); ++i) {
        s.trials.emplace_back(1, 2, std::vector<double>{firsts[i], 0.0});
        s.labels.push_back(labels[i]);
        s.subjects.push_back(0);
    }
    return s;
}

// Class 1 wins exactly when the first sample is positive.
ModelParams sign_model() {
    auto p = ModelParams::zeros(ModelSpec::affine(1, 2, 2));
    p.array("weight").values[2] = 1.0;
    return p;
}

Uap full_uap(std::vector<double> v, double xi = 10.0) {
    const std::size_t T = v.size();
    return Uap{UapMode::Full, TrialMatrix(1, T, std::move(v)), xi, NormOrder::Linf};
}

}  // namespace

TEST_CASE("rca_bca: imbalanced example") {
    std::vector<int> labels(100, 0), preds(100, 0);
    for (int i = 90; i < 100; ++i) labels[i] = 1;
    for (int i = 81; i < 90; ++i) preds[i] = 1;   // 81 of 90 class-0 trials right
    for (int i = 90; i < 95; ++i) preds[i] = 1;   // 5 of 10 class-1 trials right
    const auto a = rca_bca(preds, labels, 2);
    CHECK(a.rca == doctest::Approx(0.86).epsilon(1e-12));
    CHECK(a.bca == doctest::Approx(0.70).epsilon(1e-12));
    CHECK(a.per_class_rca[0] == doctest::Approx(0.9));
    CHECK(a.per_class_rca[1] == doctest::Approx(0.5));
}

TEST_CASE("rca_bca: perfect, half and absent classes") {
    const std::vector<int> labels{0, 1, 2, 0, 1, 2};
    CHECK(rca_bca(labels, labels, 3).rca == 1.0);
    CHECK(rca_bca(labels, labels, 3).bca == 1.0);
    const std::vector<int> half{0, 1, 2, 1, 2, 0};
    CHECK(rca_bca(half, labels, 3).rca == 0.5);
    CHECK(rca_bca(half, labels, 3).bca == 0.5);
    const auto absent = rca_bca(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 2);
    CHECK(std::isnan(absent.per_class_rca[1]));
    CHECK(absent.bca == 1.0);
    CHECK_THROWS_AS(rca_bca(std::vector<int>{0}, std::vector<int>{0, 1}, 2), ShapeError);
}

TEST_CASE("asr: fraction of flipped predictions, independent of the recorded labels") {
    const auto model = sign_model();
    const auto set = one_feature_set({1, 2, 3, 10}, {1, 1, 1, 1});
    const auto v = full_uap({-4.0, 0.0});
    CHECK(asr(model, set, v, PlacementPolicy::at({})) == 0.75);

    const auto relabeled = one_feature_set({1, 2, 3, 10}, {0, 1, 0, 0});
    CHECK(asr(model, relabeled, v, PlacementPolicy::at({})) == 0.75);
    CHECK(evaluate_uap(model, relabeled, v, PlacementPolicy::at({})).asr == 0.75);

    CHECK(asr(model, set, full_uap({0.0, 0.0}), PlacementPolicy::at({})) == 0.0);
}

TEST_CASE("target_rate: constant predictor and zero perturbation") {
    auto constant = ModelParams::zeros(ModelSpec::affine(1, 2, 3));
    constant.array("bias").values[2] = 1.0;
    TrialSet set = one_feature_set({1, -1, 5}, {0, 1, 2});
    set.class_names = {"a", "b", "c"};
    const auto v = full_uap({0.3, 0.3});
    CHECK(target_rate(constant, set, v, 2, PlacementPolicy::at({})) == 1.0);
    CHECK(target_rate(constant, set, v, 0, PlacementPolicy::at({})) == 0.0);

    const auto model = sign_model();
    const auto two = one_feature_set({1, -1, 2, 3}, {0, 0, 0, 0});
    // With v = 0 the target rate is the clean share of predictions equal to the target.
    CHECK(target_rate(model, two, full_uap({0.0, 0.0}), 1, PlacementPolicy::at({})) == 0.75);
    CHECK_THROWS_AS(target_rate(model, two, full_uap({0.0, 0.0}), 2, PlacementPolicy::at({})), ValueError);
}

TEST_CASE("spr_db: reference ratios") {
    const auto set = one_feature_set({10.0}, {0});
    CHECK(spr_db(set, full_uap({1.0, 0.0})) == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(spr_db(set, full_uap({0.0, 10.0})) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(spr_db(set, full_uap({5.0, 0.0})) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
    CHECK(spr_db(set, full_uap({0.0, 0.0})) == std::numeric_limits<double>::infinity());
}

TEST_CASE("spr_db: unchanged when signal and perturbation scale together") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        TrialSet set;
        set.class_names = {"a", "b"};
        for (int k = 0; k < 5; ++k) {
            set.trials.push_back(testing_support::random_trial(3, 8, rng));
            set.labels.push_back(k % 2);
            set.subjects.push_back(0);
        }
        Uap v{UapMode::Full, testing_support::random_trial(3, 8, rng, 0.1), 1.0, NormOrder::Linf};
        const double base = spr_db(set, v);
        const double s = 0.5 + 0.25 * i;
        for (auto& x : set.trials)
            for (auto& e : x.values()) e *= s;
        for (auto& e : v.values.values()) e *= s;
        CHECK(spr_db(set, v) == doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("spr_db: a channel-invariant row counts once per channel") {
    TrialSet set;
    set.class_names = {"a", "b"};
    set.trials.emplace_back(4, 2, 1.0);  // energy 8
    set.labels.push_back(0);
    set.subjects.push_back(0);
    Uap ci{UapMode::ChannelInvariant, TrialMatrix(1, 2, std::vector<double>{1.0, 1.0}), 1.0, NormOrder::Linf};
    CHECK(spr_db(set, ci) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("noise_baseline: bounded by xi and reproducible") {
    std::mt19937_64 rng(2);
    TrialSet set;
    set.class_names = {"a", "b"};
    for (int k = 0; k < 10; ++k) {
        set.trials.push_back(testing_support::random_trial(4, 16, rng));
        set.labels.push_back(k % 2);
        set.subjects.push_back(0);
    }
    const double xi = 0.15;
    const auto noisy = noise_baseline(set, xi, 4);
    bool any_at_bound = false;
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t k = 0; k < set.trials[i].size(); ++k) {
            const double d = std::abs(noisy.trials[i].values()[k] - set.trials[i].values()[k]);
            CHECK(d <= xi + 1e-12);
            any_at_bound = any_at_bound || d > xi - 1e-12;
        }
    CHECK(any_at_bound);
    CHECK(noisy.labels == set.labels);
    CHECK(noise_baseline(set, xi, 4) == noisy);
    CHECK_FALSE(noise_baseline(set, xi, 5) == noisy);
}

TEST_CASE("evaluate_clean and evaluate_perturbed_set agree on an unchanged copy") {
    const auto model = sign_model();
    const auto set = one_feature_set({1, -2, 3, -4}, {1, 1, 1, 0});
    const auto clean = evaluate_clean(model, set);
    CHECK(clean.rca == 0.75);
    CHECK(clean.asr == 0.0);
    CHECK(std::isinf(clean.spr_db));
    CHECK(clean.n == 4);
    const auto same = evaluate_perturbed_set(model, set, set);
    CHECK(same.rca == clean.rca);
    CHECK(same.asr == 0.0);
    CHECK(std::isinf(same.spr_db));
}

TEST_CASE("substitute_transfer: the victim as its own substitute is the white-box attack") {
    SynthConfig sc;
    sc.channels = 4;
    sc.samples = 32;
    sc.trials_per_class = 40;
    const auto split = loso_split(gen_synthetic(sc), 3, 1);
    TrainConfig tc;
    tc.seed = 4;
    const auto victim = fit_victim(ModelSpec::affine(4, 32, 2), split.train, split.val, tc).params;
    auto cfg = AttackConfig::tlm_defaults();
    cfg.max_iter = 20;
    cfg.xi = 0.3;
    cfg.seed = 11;
    const auto gray = substitute_transfer(split.train, split.val, split.test, victim, victim, cfg);
    const auto crafted = tlm_uap(victim, split.train, split.val, cfg);
    const auto white = evaluate_uap(victim, split.test, crafted.uap, PlacementPolicy::at({}));
    CHECK(gray.rca == white.rca);
    CHECK(gray.asr == white.asr);
    CHECK(gray.spr_db == white.spr_db);

    const auto mismatched = ModelParams::zeros(ModelSpec::affine(4, 16, 2));
    CHECK_THROWS_AS(substitute_transfer(split.train, split.val, split.test, mismatched, victim, cfg), ShapeError);
}

TEST_CASE("run_experiment: no attacks gives one clean row per cell") {
    ExperimentDescriptor d;
    d.data.channels = 4;
    d.data.samples = 32;
    d.data.trials_per_class = 20;
    d.victim = ModelKind::Affine;
    d.training.max_epochs = 5;
    d.folds = {3};
    const auto rows = run_experiment(d);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].attack == "clean");
    CHECK(rows[0].split == "loso");
    CHECK(rows[0].report.n == 10);
    CHECK(std::isinf(rows[0].report.spr_db));
}

TEST_CASE("report_csv and report_json formats") {
    EvalReport r;
    r.rca = 0.5;
    r.bca = 0.25;
    r.per_class_rca = {0.5, std::numeric_limits<double>::quiet_NaN()};
    r.asr = 0.125;
    r.spr_db = std::numeric_limits<double>::infinity();
    r.n = 8;
    std::vector<ReportRow> rows{{"c1", "synthetic", "loso", "small-cnn", "clean", r}};
    rows.push_back(rows[0]);
    rows[1].attack = "tlm";
    rows[1].report.target_rate = 0.75;
    rows[1].report.spr_db = 12.3456789;

    const auto csv = report_csv(rows);
    CHECK(csv ==
          "cell,dataset,split,victim,attack,rca,bca,asr,target_rate,spr_db,n\n"
          "c1,synthetic,loso,small-cnn,clean,0.500000,0.250000,0.125000,nan,inf,8\n"
          "c1,synthetic,loso,small-cnn,tlm,0.500000,0.250000,0.125000,0.750000,12.345679,8\n");

    const auto doc = nlohmann::json::parse(report_json(rows));
    REQUIRE(doc.size() == 2);
    CHECK(doc[0]["spr_db"].is_null());
    CHECK(doc[0]["spr_infinite"] == true);
    CHECK(doc[0]["target_rate"].is_null());
    CHECK(doc[0]["per_class_rca"][1].is_null());
    CHECK(doc[1]["target_rate"] == 0.75);
    CHECK(doc[1]["spr_infinite"] == false);
    CHECK(doc[1]["n"] == 8);
}

TEST_CASE("write_report puts the JSON next to the CSV") {
    testing_support::ScratchDir dir("report");
    std::vector<ReportRow> rows{{"c", "synthetic", "loso", "affine", "clean", EvalReport{}}};
    write_report(rows, dir / "out.csv");
    CHECK(testing_support::read_bytes(dir / "out.csv") == report_csv(rows));
    CHECK(testing_support::read_bytes(dir / "out.json") == report_json(rows));
}
