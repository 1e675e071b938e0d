#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uapforge/trial.hpp"

namespace uapforge {

enum class ModelKind { Affine, SmallCnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Architecture of a victim or substitute classifier.
//
// SmallCnn follows the shallow band-power layout: temporal convolution,
// spatial filter across every channel, squaring, mean pooling, log, and a
// dense softmax layer. Affine is a single linear layer over the vectorized
// trial. The SmallCnn-only fields are ignored for Affine.
struct ModelSpec {
    ModelKind kind = ModelKind::SmallCnn;
    std::size_t input_channels = 0;
    std::size_t input_samples = 0;
    std::size_t num_classes = 2;
    std::size_t temporal_filters = 8;
    std::size_t temporal_kernel_len = 13;
    std::size_t pool_len = 12;
    std::size_t pool_stride = 6;
    double log_epsilon = 1e-6;

    static ModelSpec affine(std::size_t channels, std::size_t samples, std::size_t classes);
    static ModelSpec small_cnn(std::size_t channels, std::size_t samples, std::size_t classes);

    // Length of the temporal convolution output (valid padding).
    std::size_t conv_len() const { return input_samples - temporal_kernel_len + 1; }
    std::size_t pooled_len() const { return (conv_len() - pool_len) / pool_stride + 1; }
    std::size_t feature_count() const { return temporal_filters * pooled_len(); }

    // Throws ShapeError naming the violated constraint.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ParamArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

// Every weight of one classifier. Gradients use the same type, so a
// gradient is congruent to the parameters it was taken against.
struct ModelParams {
    ModelSpec spec;
    std::vector<ParamArray> arrays;

    std::size_t parameter_count() const;
    const ParamArray& array(const std::string& name) const;
    ParamArray& array(const std::string& name);

    // Zero-valued arrays with the shapes the spec implies.
    static ModelParams zeros(const ModelSpec& spec);

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Array names and shapes implied by a spec, in storage order.
std::vector<ParamArray> expected_layout(const ModelSpec& spec);

// Glorot-uniform weights, s = sqrt(6 / (fan_in + fan_out)) per layer; biases zero.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

// Raw class scores f_j(x).
std::vector<double> logits(const ModelParams& params, const TrialMatrix& trial);
// Softmax of the logits.
std::vector<double> forward(const ModelParams& params, const TrialMatrix& trial);
// Argmax of forward; ties resolve to the smallest class index.
int predict_label(const ModelParams& params, const TrialMatrix& trial);
int argmax(std::span<const double> values);
std::vector<int> predict_labels(const ModelParams& params, std::span<const TrialMatrix> trials);

std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kLossLogFloor = 1e-12;

double weighted_cross_entropy(const ModelParams& params, std::span<const TrialMatrix> trials,
                              std::span<const int> labels, std::span<const double> class_weights);

// Mean weighted cross entropy together with its exact parameter gradient.
struct LossAndGrad {
    double loss = 0.0;
    ModelParams grad;
};
LossAndGrad loss_and_grad(const ModelParams& params, std::span<const TrialMatrix> trials, std::span<const int> labels,
                          std::span<const double> class_weights);
ModelParams grad_params(const ModelParams& params, std::span<const TrialMatrix> trials,
                        std::span<const int> labels, std::span<const double> class_weights);

// Scalar of the network output that grad_input differentiates.
struct InputObjective {
    enum class Kind { Logit, LogProb, NegLogProb };
    Kind kind = Kind::LogProb;
    int label = 0;

    static InputObjective logit(int j) { return {Kind::Logit, j}; }
    static InputObjective log_prob(int y) { return {Kind::LogProb, y}; }
    static InputObjective neg_log_prob(int y) { return {Kind::NegLogProb, y}; }
};

// Value of the selected scalar; log terms are floored at kLossLogFloor.
double objective_value(const ModelParams& params, const TrialMatrix& trial, InputObjective objective);

// Gradient of the selected scalar with respect to every input entry.
TrialMatrix grad_input(const ModelParams& params, const TrialMatrix& trial, InputObjective objective);

// Input gradient of every logit at once (row j = d f_j / d x), plus the logits.
struct LogitJacobian {
    std::vector<double> logits;
    std::vector<TrialMatrix> rows;
};
LogitJacobian logit_jacobian(const ModelParams& params, const TrialMatrix& trial);

void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);
std::string model_to_json(const ModelParams& params);
ModelParams model_from_json(const std::string& text);

}  // namespace uapforge
