#include "uapforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "uapforge/errors.hpp"

namespace uapforge {

namespace {

constexpr const char* kAffineWeight = "weight";
constexpr const char* kAffineBias = "bias";
constexpr const char* kTemporalKernel = "temporal_kernel";
constexpr const char* kSpatialWeight = "spatial_weight";
constexpr const char* kSpatialBias = "spatial_bias";
constexpr const char* kDenseWeight = "dense_weight";
constexpr const char* kDenseBias = "dense_bias";

void check_finite(std::span<const double> values, const char* layer) {
    for (double v : values)
        if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value in layer '") + layer + "'");
}

void check_trial(const ModelSpec& spec, const TrialMatrix& trial) {
    if (trial.channels() != spec.input_channels || trial.samples() != spec.input_samples)
        throw ShapeError("trial is " + std::to_string(trial.channels()) + "x" + std::to_string(trial.samples()) +
                         ", model expects " + std::to_string(spec.input_channels) + "x" +
                         std::to_string(spec.input_samples));
}

// Intermediate activations of one SmallCnn forward pass.
struct CnnTrace {
    std::vector<double> spatial;  // [Kt][T]   spatial filter applied to the raw channels
    std::vector<double> conv;     // [Kt][T']  temporal convolution of `spatial` plus bias
    std::vector<double> pooled;   // [Kt][P]   mean of squared conv over each window
    std::vector<double> features; // [Kt][P]   log(max(pooled, eps))
    std::vector<double> logits;   // [K]
};

// The temporal convolution and the spatial filter are both linear, so the
// spatial mix is applied first; this is the same map with fewer operations.
CnnTrace cnn_forward(const ModelParams& params, const TrialMatrix& x) {
    const auto& s = params.spec;
    const std::size_t C = s.input_channels, T = s.input_samples, Kt = s.temporal_filters;
    const std::size_t L = s.temporal_kernel_len, Tc = s.conv_len(), P = s.pooled_len();
    const std::size_t F = s.feature_count(), K = s.num_classes;
    const auto& kernel = params.arrays[0].values;
    const auto& spatial_w = params.arrays[1].values;
    const auto& spatial_b = params.arrays[2].values;
    const auto& dense_w = params.arrays[3].values;
    const auto& dense_b = params.arrays[4].values;

    CnnTrace tr;
    tr.spatial.assign(Kt * T, 0.0);
    for (std::size_t k = 0; k < Kt; ++k) {
        double* out = tr.spatial.data() + k * T;
        for (std::size_t c = 0; c < C; ++c) {
            const double w = spatial_w[k * C + c];
            auto row = x.row(c);
            for (std::size_t t = 0; t < T; ++t) out[t] += w * row[t];
        }
    }
    tr.conv.assign(Kt * Tc, 0.0);
    for (std::size_t k = 0; k < Kt; ++k) {
        const double* in = tr.spatial.data() + k * T;
        const double* ker = kernel.data() + k * L;
        double* out = tr.conv.data() + k * Tc;
        for (std::size_t u = 0; u < Tc; ++u) {
            double acc = spatial_b[k];
            for (std::size_t l = 0; l < L; ++l) acc += ker[l] * in[u + l];
            out[u] = acc;
        }
    }
    check_finite(tr.conv, "spatial-temporal convolution");
    tr.pooled.assign(F, 0.0);
    tr.features.assign(F, 0.0);
    const double inv_len = 1.0 / static_cast<double>(s.pool_len);
    for (std::size_t k = 0; k < Kt; ++k) {
        const double* z = tr.conv.data() + k * Tc;
        for (std::size_t j = 0; j < P; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < s.pool_len; ++i) {
                const double v = z[j * s.pool_stride + i];
                acc += v * v;
            }
            tr.pooled[k * P + j] = acc * inv_len;
            tr.features[k * P + j] = std::log(std::max(acc * inv_len, s.log_epsilon));
        }
    }
    check_finite(tr.pooled, "square-mean-pool");
    tr.logits.assign(K, 0.0);
    for (std::size_t o = 0; o < K; ++o) {
        double acc = dense_b[o];
        const double* w = dense_w.data() + o * F;
        for (std::size_t f = 0; f < F; ++f) acc += w[f] * tr.features[f];
        tr.logits[o] = acc;
    }
    check_finite(tr.logits, "dense");
    return tr;
}

// Backpropagates d(scalar)/d(logits) through a SmallCnn trace. Either output
// may be null; parameter gradients are accumulated (scaled by `scale`).
void cnn_backward(const ModelParams& params, const TrialMatrix& x, const CnnTrace& tr,
                  std::span<const double> dlogits, double scale, ModelParams* dparams, TrialMatrix* dx) {
    const auto& s = params.spec;
    const std::size_t C = s.input_channels, T = s.input_samples, Kt = s.temporal_filters;
    const std::size_t L = s.temporal_kernel_len, Tc = s.conv_len(), P = s.pooled_len();
    const std::size_t F = s.feature_count(), K = s.num_classes;
    const auto& kernel = params.arrays[0].values;
    const auto& spatial_w = params.arrays[1].values;
    const auto& dense_w = params.arrays[3].values;

    std::vector<double> dfeat(F, 0.0);
    for (std::size_t o = 0; o < K; ++o) {
        const double g = dlogits[o] * scale;
        if (g == 0.0) continue;
        const double* w = dense_w.data() + o * F;
        for (std::size_t f = 0; f < F; ++f) dfeat[f] += w[f] * g;
        if (dparams) {
            double* dw = dparams->arrays[3].values.data() + o * F;
            for (std::size_t f = 0; f < F; ++f) dw[f] += g * tr.features[f];
            dparams->arrays[4].values[o] += g;
        }
    }
    std::vector<double> dz(Kt * Tc, 0.0);
    const double inv_len = 1.0 / static_cast<double>(s.pool_len);
    for (std::size_t k = 0; k < Kt; ++k) {
        const double* z = tr.conv.data() + k * Tc;
        double* d = dz.data() + k * Tc;
        for (std::size_t j = 0; j < P; ++j) {
            const double m = tr.pooled[k * P + j];
            if (m <= s.log_epsilon) continue;  // floored: flat region
            const double dm = dfeat[k * P + j] / m * inv_len;
            for (std::size_t i = 0; i < s.pool_len; ++i) {
                const std::size_t u = j * s.pool_stride + i;
                d[u] += 2.0 * z[u] * dm;
            }
        }
    }
    std::vector<double> dspatial(Kt * T, 0.0);
    for (std::size_t k = 0; k < Kt; ++k) {
        const double* d = dz.data() + k * Tc;
        const double* ker = kernel.data() + k * L;
        const double* in = tr.spatial.data() + k * T;
        double* din = dspatial.data() + k * T;
        double db = 0.0;
        for (std::size_t u = 0; u < Tc; ++u) {
            const double g = d[u];
            if (g == 0.0) continue;
            db += g;
            for (std::size_t l = 0; l < L; ++l) din[u + l] += g * ker[l];
        }
        if (dparams) {
            dparams->arrays[2].values[k] += db;
            double* dker = dparams->arrays[0].values.data() + k * L;
            for (std::size_t l = 0; l < L; ++l) {
                double acc = 0.0;
                for (std::size_t u = 0; u < Tc; ++u) acc += d[u] * in[u + l];
                dker[l] += acc;
            }
        }
    }
    if (dparams) {
        auto& dsw = dparams->arrays[1].values;
        for (std::size_t k = 0; k < Kt; ++k) {
            const double* din = dspatial.data() + k * T;
            for (std::size_t c = 0; c < C; ++c) {
                auto row = x.row(c);
                double acc = 0.0;
                for (std::size_t t = 0; t < T; ++t) acc += din[t] * row[t];
                dsw[k * C + c] += acc;
            }
        }
    }
    if (dx) {
        for (std::size_t c = 0; c < C; ++c) {
            auto out = dx->row(c);
            for (std::size_t k = 0; k < Kt; ++k) {
                const double w = spatial_w[k * C + c];
                const double* din = dspatial.data() + k * T;
                for (std::size_t t = 0; t < T; ++t) out[t] += w * din[t];
            }
        }
    }
}

std::vector<double> affine_logits(const ModelParams& params, const TrialMatrix& x) {
    const auto& s = params.spec;
    const std::size_t D = s.input_channels * s.input_samples;
    const auto& w = params.arrays[0].values;
    const auto& b = params.arrays[1].values;
    auto xv = x.values();
    std::vector<double> out(s.num_classes);
    for (std::size_t o = 0; o < s.num_classes; ++o) {
        double acc = b[o];
        const double* row = w.data() + o * D;
        for (std::size_t i = 0; i < D; ++i) acc += row[i] * xv[i];
        out[o] = acc;
    }
    check_finite(out, "affine");
    return out;
}

void affine_backward(const ModelParams& params, const TrialMatrix& x, std::span<const double> dlogits,
                     double scale, ModelParams* dparams, TrialMatrix* dx) {
    const auto& s = params.spec;
    const std::size_t D = s.input_channels * s.input_samples;
    const auto& w = params.arrays[0].values;
    auto xv = x.values();
    for (std::size_t o = 0; o < s.num_classes; ++o) {
        const double g = dlogits[o] * scale;
        if (g == 0.0) continue;
        if (dparams) {
            double* dw = dparams->arrays[0].values.data() + o * D;
            for (std::size_t i = 0; i < D; ++i) dw[i] += g * xv[i];
            dparams->arrays[1].values[o] += g;
        }
        if (dx) {
            auto out = dx->values();
            const double* row = w.data() + o * D;
            for (std::size_t i = 0; i < D; ++i) out[i] += g * row[i];
        }
    }
}

void check_params(const ModelParams& params);

// Logits plus a closure-free way to backpropagate from them.
struct Pass {
    const ModelParams& params;
    const TrialMatrix& x;
    CnnTrace trace;
    std::vector<double> logits;

    Pass(const ModelParams& p, const TrialMatrix& trial) : params(p), x(trial) {
        check_params(p);
        check_trial(p.spec, trial);
        if (p.spec.kind == ModelKind::SmallCnn) {
            trace = cnn_forward(p, trial);
            logits = trace.logits;
        } else {
            logits = affine_logits(p, trial);
        }
    }

    void backward(std::span<const double> dlogits, double scale, ModelParams* dparams, TrialMatrix* dx) const {
        if (params.spec.kind == ModelKind::SmallCnn)
            cnn_backward(params, x, trace, dlogits, scale, dparams, dx);
        else
            affine_backward(params, x, dlogits, scale, dparams, dx);
    }
};

void check_label(const ModelSpec& spec, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= spec.num_classes)
        throw ValueError("class index " + std::to_string(label) + " outside [0, " + std::to_string(spec.num_classes) +
                         ")");
}

std::vector<std::pair<const char*, std::size_t>> layout_sizes(const ModelSpec& s) {
    if (s.kind == ModelKind::Affine)
        return {{kAffineWeight, s.num_classes * s.input_channels * s.input_samples}, {kAffineBias, s.num_classes}};
    return {{kTemporalKernel, s.temporal_filters * s.temporal_kernel_len},
            {kSpatialWeight, s.temporal_filters * s.input_channels},
            {kSpatialBias, s.temporal_filters},
            {kDenseWeight, s.num_classes * s.feature_count()},
            {kDenseBias, s.num_classes}};
}

void check_params(const ModelParams& params) {
    params.spec.validate();
    auto layout = layout_sizes(params.spec);
    if (layout.size() != params.arrays.size()) throw ShapeError("model has the wrong number of parameter arrays");
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& [name, size] = layout[i];
        if (params.arrays[i].name != name)
            throw ShapeError("parameter array " + std::to_string(i) + " should be '" + name + "'");
        if (params.arrays[i].values.size() != size)
            throw ShapeError("parameter array '" + std::string(name) + "' has " +
                             std::to_string(params.arrays[i].values.size()) + " values, expected " +
                             std::to_string(size));
    }
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::Affine ? "affine" : "small-cnn"; }

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "affine") return ModelKind::Affine;
    if (name == "small-cnn") return ModelKind::SmallCnn;
    throw FormatError("unknown model kind '" + name + "'");
}

ModelSpec ModelSpec::affine(std::size_t channels, std::size_t samples, std::size_t classes) {
    ModelSpec s;
    s.kind = ModelKind::Affine;
    s.input_channels = channels;
    s.input_samples = samples;
    s.num_classes = classes;
    return s;
}

ModelSpec ModelSpec::small_cnn(std::size_t channels, std::size_t samples, std::size_t classes) {
    ModelSpec s;
    s.kind = ModelKind::SmallCnn;
    s.input_channels = channels;
    s.input_samples = samples;
    s.num_classes = classes;
    return s;
}

void ModelSpec::validate() const {
    if (input_channels == 0 || input_samples == 0) throw ShapeError("model input must be at least 1x1");
    if (num_classes < 2) throw ShapeError("model needs at least 2 classes");
    if (kind == ModelKind::Affine) return;
    if (temporal_filters == 0 || temporal_kernel_len == 0 || pool_len == 0 || pool_stride == 0)
        throw ShapeError("small-cnn layer sizes must be positive");
    if (temporal_kernel_len > input_samples) throw ShapeError("temporal kernel longer than the trial");
    if (pool_len > conv_len()) throw ShapeError("pooling window longer than the convolution output");
    if (!(log_epsilon > 0.0)) throw ShapeError("log epsilon must be positive");
}

std::vector<ParamArray> expected_layout(const ModelSpec& spec) {
    spec.validate();
    auto make = [](const char* name, std::vector<std::size_t> shape) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return ParamArray{name, std::move(shape), std::vector<double>(n, 0.0)};
    };
    if (spec.kind == ModelKind::Affine) {
        return {make(kAffineWeight, {spec.num_classes, spec.input_channels * spec.input_samples}),
                make(kAffineBias, {spec.num_classes})};
    }
    return {make(kTemporalKernel, {spec.temporal_filters, spec.temporal_kernel_len}),
            make(kSpatialWeight, {spec.temporal_filters, spec.input_channels}),
            make(kSpatialBias, {spec.temporal_filters}),
            make(kDenseWeight, {spec.num_classes, spec.feature_count()}),
            make(kDenseBias, {spec.num_classes})};
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays) n += a.values.size();
    return n;
}

const ParamArray& ModelParams::array(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw ValueError("no parameter array named '" + name + "'");
}

ParamArray& ModelParams::array(const std::string& name) {
    return const_cast<ParamArray&>(static_cast<const ModelParams&>(*this).array(name));
}

ModelParams ModelParams::zeros(const ModelSpec& spec) { return ModelParams{spec, expected_layout(spec)}; }

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    ModelParams params = ModelParams::zeros(spec);
    std::mt19937_64 rng(seed);
    auto fill = [&rng](ParamArray& a, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& v : a.values) v = dist(rng);
    };
    if (spec.kind == ModelKind::Affine) {
        fill(params.arrays[0], spec.input_channels * spec.input_samples, spec.num_classes);
    } else {
        fill(params.arrays[0], spec.temporal_kernel_len, spec.temporal_filters);
        fill(params.arrays[1], spec.input_channels, 1);
        fill(params.arrays[3], spec.feature_count(), spec.num_classes);
    }
    return params;
}

std::vector<double> softmax(std::span<const double> z) {
    const double top = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) total += p[i] = std::exp(z[i] - top);
    for (auto& v : p) v /= total;
    return p;
}

int argmax(std::span<const double> values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::vector<double> logits(const ModelParams& params, const TrialMatrix& trial) { return Pass(params, trial).logits; }

std::vector<double> forward(const ModelParams& params, const TrialMatrix& trial) {
    return softmax(logits(params, trial));
}

int predict_label(const ModelParams& params, const TrialMatrix& trial) {
    // Argmax over logits equals argmax over the softmax, without rounding ties apart.
    return argmax(logits(params, trial));
}

std::vector<int> predict_labels(const ModelParams& params, std::span<const TrialMatrix> trials) {
    std::vector<int> out;
    out.reserve(trials.size());
    for (const auto& t : trials) out.push_back(predict_label(params, t));
    return out;
}

double weighted_cross_entropy(const ModelParams& params, std::span<const TrialMatrix> trials,
                              std::span<const int> labels, std::span<const double> class_weights) {
    if (trials.empty() || trials.size() != labels.size())
        throw ShapeError("cross entropy needs equally many (>= 1) trials and labels");
    if (class_weights.size() != params.spec.num_classes) throw ShapeError("one class weight per class required");
    double total = 0.0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        check_label(params.spec, labels[i]);
        auto p = forward(params, trials[i]);
        total += -class_weights[labels[i]] * std::log(std::max(p[labels[i]], kLossLogFloor));
    }
    return total / static_cast<double>(trials.size());
}

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const TrialMatrix> trials, std::span<const int> labels,
                          std::span<const double> class_weights) {
    if (trials.empty() || trials.size() != labels.size())
        throw ShapeError("gradient needs equally many (>= 1) trials and labels");
    if (class_weights.size() != params.spec.num_classes) throw ShapeError("one class weight per class required");
    check_params(params);
    LossAndGrad out{0.0, ModelParams::zeros(params.spec)};
    const double scale = 1.0 / static_cast<double>(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const int y = labels[i];
        check_label(params.spec, y);
        Pass pass(params, trials[i]);
        auto p = softmax(pass.logits);
        out.loss += -class_weights[y] * std::log(std::max(p[y], kLossLogFloor));
        if (p[y] < kLossLogFloor) continue;  // floored log: zero derivative
        std::vector<double> dlogits(p.size());
        for (std::size_t o = 0; o < p.size(); ++o)
            dlogits[o] = class_weights[y] * (p[o] - (static_cast<int>(o) == y ? 1.0 : 0.0));
        pass.backward(dlogits, scale, &out.grad, nullptr);
    }
    out.loss *= scale;
    return out;
}

ModelParams grad_params(const ModelParams& params, std::span<const TrialMatrix> trials, std::span<const int> labels,
                        std::span<const double> class_weights) {
    return loss_and_grad(params, trials, labels, class_weights).grad;
}

double objective_value(const ModelParams& params, const TrialMatrix& trial, InputObjective objective) {
    check_label(params.spec, objective.label);
    auto z = logits(params, trial);
    if (objective.kind == InputObjective::Kind::Logit) return z[objective.label];
    const double lp = std::log(std::max(softmax(z)[objective.label], kLossLogFloor));
    return objective.kind == InputObjective::Kind::LogProb ? lp : -lp;
}

TrialMatrix grad_input(const ModelParams& params, const TrialMatrix& trial, InputObjective objective) {
    check_label(params.spec, objective.label);
    Pass pass(params, trial);
    const std::size_t K = params.spec.num_classes;
    std::vector<double> dlogits(K, 0.0);
    if (objective.kind == InputObjective::Kind::Logit) {
        dlogits[objective.label] = 1.0;
    } else {
        auto p = softmax(pass.logits);
        if (p[objective.label] >= kLossLogFloor) {
            const double sign = objective.kind == InputObjective::Kind::LogProb ? 1.0 : -1.0;
            for (std::size_t o = 0; o < K; ++o)
                dlogits[o] = sign * ((static_cast<int>(o) == objective.label ? 1.0 : 0.0) - p[o]);
        }
    }
    TrialMatrix dx(trial.channels(), trial.samples());
    pass.backward(dlogits, 1.0, nullptr, &dx);
    return dx;
}

LogitJacobian logit_jacobian(const ModelParams& params, const TrialMatrix& trial) {
    Pass pass(params, trial);
    const std::size_t K = params.spec.num_classes;
    LogitJacobian out;
    out.logits = pass.logits;
    out.rows.reserve(K);
    std::vector<double> e(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
        e.assign(K, 0.0);
        e[j] = 1.0;
        TrialMatrix dx(trial.channels(), trial.samples());
        pass.backward(e, 1.0, nullptr, &dx);
        out.rows.push_back(std::move(dx));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file

std::string model_to_json(const ModelParams& params) {
    check_params(params);
    const auto& s = params.spec;
    nlohmann::ordered_json spec = {
        {"kind", to_string(s.kind)},
        {"input_channels", s.input_channels},
        {"input_samples", s.input_samples},
        {"num_classes", s.num_classes},
    };
    if (s.kind == ModelKind::SmallCnn) {
        spec["temporal_filters"] = s.temporal_filters;
        spec["temporal_kernel_len"] = s.temporal_kernel_len;
        spec["pool_len"] = s.pool_len;
        spec["pool_stride"] = s.pool_stride;
        spec["log_epsilon"] = s.log_epsilon;
    }
    nlohmann::ordered_json arrays = nlohmann::ordered_json::object();
    for (const auto& a : params.arrays) arrays[a.name] = a.values;
    nlohmann::ordered_json doc = {{"format", "uapforge-model"}, {"version", 1}, {"spec", spec}, {"arrays", arrays}};
    return doc.dump(1);
}

ModelParams model_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (!doc.is_object() || doc.value("format", "") != "uapforge-model")
            throw FormatError("model file: missing format tag 'uapforge-model'");
        if (doc.value("version", 0) != 1) throw FormatError("model file: unsupported version");
        const auto& js = doc.at("spec");
        ModelSpec spec;
        spec.kind = model_kind_from_string(js.at("kind").get<std::string>());
        spec.input_channels = js.at("input_channels").get<std::size_t>();
        spec.input_samples = js.at("input_samples").get<std::size_t>();
        spec.num_classes = js.at("num_classes").get<std::size_t>();
        if (spec.kind == ModelKind::SmallCnn) {
            spec.temporal_filters = js.at("temporal_filters").get<std::size_t>();
            spec.temporal_kernel_len = js.at("temporal_kernel_len").get<std::size_t>();
            spec.pool_len = js.at("pool_len").get<std::size_t>();
            spec.pool_stride = js.at("pool_stride").get<std::size_t>();
            spec.log_epsilon = js.at("log_epsilon").get<double>();
        }
        ModelParams params = ModelParams::zeros(spec);
        const auto& arrays = doc.at("arrays");
        for (auto& a : params.arrays) {
            if (!arrays.contains(a.name)) throw ShapeError("model file: missing array '" + a.name + "'");
            auto values = arrays.at(a.name).get<std::vector<double>>();
            if (values.size() != a.values.size())
                throw ShapeError("model file: array '" + a.name + "' has " + std::to_string(values.size()) +
                                 " values, expected " + std::to_string(a.values.size()));
            check_finite(values, a.name.c_str());
            a.values = std::move(values);
        }
        return params;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file: ") + e.what());
    }
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << model_to_json(params) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace uapforge
