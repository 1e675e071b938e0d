#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "support.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/model.hpp"

using namespace uapforge;
using testing_support::central_difference;
using testing_support::random_params;
using testing_support::random_trial;
using testing_support::relative_error;

namespace {

ModelParams affine_2x2(std::vector<double> w, std::vector<double> b = {0.0, 0.0}) {
    auto p = ModelParams::zeros(ModelSpec::affine(1, 2, 2));
    p.array("weight").values = std::move(w);
    p.array("bias").values = std::move(b);
    return p;
}

// Output length of a valid convolution followed by pooling, computed without
// touching ModelSpec's own helpers.
std::size_t pooled_by_hand(std::size_t T, std::size_t Lt, std::size_t Pl, std::size_t Ps) {
    const std::size_t conv = T - Lt + 1;
    std::size_t count = 0;
    for (std::size_t start = 0; start + Pl <= conv; start += Ps) ++count;
    return count;
}

}  // namespace

TEST_CASE("init_params: affine weights stay inside the Glorot bound, biases zero") {
    const auto p = init_params(ModelSpec::affine(2, 2, 2), 7);
    const auto& w = p.array("weight");
    CHECK(w.shape == std::vector<std::size_t>{2, 4});
    for (double v : w.values) CHECK(std::abs(v) <= 1.0);
    CHECK(p.array("bias").values == std::vector<double>{0.0, 0.0});
}

TEST_CASE("init_params: deterministic per seed") {
    const auto spec = ModelSpec::small_cnn(8, 64, 2);
    CHECK(init_params(spec, 11) == init_params(spec, 11));
    CHECK_FALSE(init_params(spec, 11) == init_params(spec, 12));
}

TEST_CASE("init_params: small-cnn array shapes match a hand shape calculator") {
    auto spec = ModelSpec::small_cnn(8, 64, 2);
    spec.temporal_filters = 4;
    spec.temporal_kernel_len = 13;
    const auto p = init_params(spec, 3);
    const std::size_t pooled = pooled_by_hand(64, 13, spec.pool_len, spec.pool_stride);
    CHECK(pooled == 7);  // conv 52, windows of 12 every 6 -> starts 0..36
    CHECK(p.array("temporal_kernel").shape == std::vector<std::size_t>{4, 13});
    CHECK(p.array("spatial_weight").shape == std::vector<std::size_t>{4, 8});
    CHECK(p.array("spatial_bias").shape == std::vector<std::size_t>{4});
    CHECK(p.array("dense_weight").shape == std::vector<std::size_t>{2, 4 * pooled});
    CHECK(p.array("dense_bias").shape == std::vector<std::size_t>{2});
    for (double v : p.array("spatial_bias").values) CHECK(v == 0.0);
}

TEST_CASE("ModelSpec::validate rejects impossible layouts") {
    auto spec = ModelSpec::small_cnn(4, 10, 2);
    CHECK_THROWS_AS(spec.validate(), ShapeError);  // kernel 13 > T
    spec = ModelSpec::small_cnn(4, 64, 1);
    CHECK_THROWS_AS(spec.validate(), ShapeError);
    CHECK_THROWS_AS(init_params(ModelSpec::affine(0, 4, 2), 1), ShapeError);
}

TEST_CASE("forward: zero affine model is uniform, label 0 by tie-break") {
    const auto p = ModelParams::zeros(ModelSpec::affine(2, 3, 4));
    TrialMatrix x(2, 3, 1.5);
    const auto prob = forward(p, x);
    for (double v : prob) CHECK(v == doctest::Approx(0.25));
    CHECK(predict_label(p, x) == 0);
}

TEST_CASE("forward: softmax of logits (3, 0)") {
    const auto p = affine_2x2({1, 0, 0, 0});
    const auto prob = forward(p, TrialMatrix(1, 2, std::vector<double>{3.0, 0.0}));
    // 1 / (1 + e^-3) by hand.
    CHECK(prob[0] == doctest::Approx(0.9526).epsilon(1e-4));
    CHECK(prob[1] == doctest::Approx(0.0474).epsilon(1e-3));
    CHECK(std::abs(prob[0] - 1.0 / (1.0 + std::exp(-3.0))) < 1e-15);
}

TEST_CASE("predict_label: argmax and sign of w.x") {
    CHECK(argmax(std::vector<double>{0.1, 0.7, 0.2}) == 1);
    CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
    // Binary model written as logits (0, w.x): w = (3, 4), x = (5, 0).
    const auto p = affine_2x2({0, 0, 3, 4});
    CHECK(predict_label(p, TrialMatrix(1, 2, std::vector<double>{5.0, 0.0})) == 1);
    CHECK(predict_label(p, TrialMatrix(1, 2, std::vector<double>{-5.0, 0.0})) == 0);
}

TEST_CASE("forward: probabilities sum to one for random models") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto spec = i % 2 ? ModelSpec::small_cnn(4, 40, 3) : ModelSpec::affine(4, 40, 3);
        const auto p = random_params(spec, rng, 0.5);
        const auto prob = forward(p, random_trial(4, 40, rng, 3.0));
        double total = 0.0;
        for (double v : prob) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
    }
}

TEST_CASE("forward: shape mismatch and non-finite parameters are reported") {
    const auto p = init_params(ModelSpec::small_cnn(4, 40, 2), 1);
    CHECK_THROWS_AS(forward(p, TrialMatrix(3, 40)), ShapeError);
    auto bad = p;
    bad.array("dense_weight").values[0] = std::nan("");
    try {
        forward(bad, TrialMatrix(4, 40));
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("dense") != std::string::npos);
    }
}

TEST_CASE("weighted_cross_entropy: analytic cases") {
    const auto zero = ModelParams::zeros(ModelSpec::affine(1, 2, 2));
    std::vector<TrialMatrix> xs{TrialMatrix(1, 2, 0.3), TrialMatrix(1, 2, -1.0)};
    std::vector<int> ys{0, 1};
    std::vector<double> w{1.0, 1.0};
    CHECK(weighted_cross_entropy(zero, xs, ys, w) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // Logit gap of 200 makes p_y = 1 to machine precision.
    const auto sure = affine_2x2({100, 0, -100, 0});
    std::vector<TrialMatrix> one{TrialMatrix(1, 2, std::vector<double>{1.0, 0.0})};
    std::vector<int> y0{0};
    CHECK(weighted_cross_entropy(sure, one, y0, w) <= 1e-11);

    std::vector<int> bad{2};
    CHECK_THROWS_AS(weighted_cross_entropy(zero, one, bad, w), ValueError);
}

TEST_CASE("grad_input: affine logit gradient is the weight row exactly") {
    std::mt19937_64 rng(1);
    const auto spec = ModelSpec::affine(3, 5, 3);
    const auto p = random_params(spec, rng, 1.0);
    const auto x = random_trial(3, 5, rng);
    for (int j = 0; j < 3; ++j) {
        const auto g = grad_input(p, x, InputObjective::logit(j));
        const auto& w = p.array("weight").values;
        for (std::size_t i = 0; i < 15; ++i) CHECK(g.values()[i] == w[j * 15 + i]);
    }
}

TEST_CASE("grad_input: -log p gradient is the negated log p gradient") {
    std::mt19937_64 rng(2);
    const auto p = random_params(ModelSpec::small_cnn(4, 40, 3), rng, 0.4);
    const auto x = random_trial(4, 40, rng);
    const auto a = grad_input(p, x, InputObjective::log_prob(2));
    const auto b = grad_input(p, x, InputObjective::neg_log_prob(2));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values()[i] == -b.values()[i]);
}

TEST_CASE("grad_input: matches central differences on random small-cnn instances") {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const auto p = random_params(ModelSpec::small_cnn(3, 30, 3), rng, 0.4);
        auto x = random_trial(3, 30, rng);
        const auto objective =
            inst % 2 == 0 ? InputObjective::logit(inst % 3) : InputObjective::log_prob(static_cast<int>(inst % 3));
        const auto g = grad_input(p, x, objective);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double fd =
                central_difference([&] { return objective_value(p, x, objective); }, x.values()[i]);
            worst = std::max(worst, relative_error(g.values()[i], fd));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("grad_params: matches central differences for both model kinds") {
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const auto spec = inst % 2 ? ModelSpec::affine(3, 30, 3) : ModelSpec::small_cnn(3, 30, 3);
        auto p = random_params(spec, rng, 0.3);
        std::vector<TrialMatrix> xs{random_trial(3, 30, rng), random_trial(3, 30, rng), random_trial(3, 30, rng)};
        std::vector<int> ys{0, 2, 1};
        std::vector<double> w{0.5, 1.0, 1.5};
        const auto g = grad_params(p, xs, ys, w);
        for (std::size_t a = 0; a < p.arrays.size(); ++a)
            for (std::size_t i = 0; i < p.arrays[a].values.size(); ++i) {
                const double fd = central_difference([&] { return weighted_cross_entropy(p, xs, ys, w); },
                                                     p.arrays[a].values[i]);
                worst = std::max(worst, relative_error(g.arrays[a].values[i], fd));
            }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("grad_params: symmetric affine batch has zero bias gradient") {
    const auto zero = ModelParams::zeros(ModelSpec::affine(1, 2, 2));
    const TrialMatrix x(1, 2, std::vector<double>{0.7, -1.2});
    const TrialMatrix neg(1, 2, std::vector<double>{-0.7, 1.2});
    std::vector<TrialMatrix> xs{x, neg};
    std::vector<int> ys{0, 1};
    std::vector<double> w{1.0, 1.0};
    const auto g = grad_params(zero, xs, ys, w);
    for (double v : g.array("bias").values) CHECK(v == 0.0);
}

TEST_CASE("grad_params: duplicating the batch leaves the gradient unchanged") {
    std::mt19937_64 rng(6);
    const auto p = random_params(ModelSpec::small_cnn(3, 30, 2), rng, 0.3);
    std::vector<TrialMatrix> xs{random_trial(3, 30, rng), random_trial(3, 30, rng)};
    std::vector<int> ys{0, 1};
    std::vector<double> w{1.0, 1.0};
    auto twice = xs;
    twice.insert(twice.end(), xs.begin(), xs.end());
    std::vector<int> ys2{0, 1, 0, 1};
    const auto a = grad_params(p, xs, ys, w);
    const auto b = grad_params(p, twice, ys2, w);
    for (std::size_t k = 0; k < a.arrays.size(); ++k)
        for (std::size_t i = 0; i < a.arrays[k].values.size(); ++i)
            CHECK(a.arrays[k].values[i] == doctest::Approx(b.arrays[k].values[i]).epsilon(1e-12));
}

TEST_CASE("logit_jacobian rows equal per-logit input gradients") {
    std::mt19937_64 rng(8);
    const auto p = random_params(ModelSpec::small_cnn(3, 30, 3), rng, 0.4);
    const auto x = random_trial(3, 30, rng);
    const auto jac = logit_jacobian(p, x);
    CHECK(jac.logits == logits(p, x));
    for (int j = 0; j < 3; ++j) CHECK(jac.rows[j] == grad_input(p, x, InputObjective::logit(j)));
}

TEST_CASE("model file round trip is bit exact") {
    testing_support::ScratchDir dir("model");
    std::mt19937_64 rng(9);
    for (const auto& spec : {ModelSpec::small_cnn(4, 40, 3), ModelSpec::affine(2, 5, 2)}) {
        auto p = random_params(spec, rng, 1.0);
        p.arrays[0].values[0] = 0.1 + 0.2;  // not representable in short decimal
        save_model(p, dir / "m.json");
        CHECK(load_model(dir / "m.json") == p);
    }
}

TEST_CASE("model file errors: truncated array names the layer, unknown kind is a format error") {
    const auto p = init_params(ModelSpec::small_cnn(4, 40, 2), 1);
    auto doc = nlohmann::json::parse(model_to_json(p));

    auto truncated = doc;
    truncated["arrays"]["spatial_weight"].erase(0);
    try {
        model_from_json(truncated.dump());
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("spatial_weight") != std::string::npos);
    }

    auto unknown = doc;
    unknown["spec"]["kind"] = "transformer";
    CHECK_THROWS_AS(model_from_json(unknown.dump()), FormatError);

    auto untagged = doc;
    untagged["format"] = "something-else";
    CHECK_THROWS_AS(model_from_json(untagged.dump()), FormatError);
    CHECK_THROWS_AS(model_from_json("{not json"), FormatError);
}
