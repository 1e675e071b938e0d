#include "uapforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/seed.hpp"

namespace uapforge {


void SynthConfig::validate() const {
    if (num_classes < 2) throw ValueError("synthetic data needs K >= 2 classes");
    if (channels == 0 || samples == 0) throw ValueError("synthetic trials need C >= 1 and T >= 1");
    if (trials_per_class == 0 || num_subjects == 0) throw ValueError("trials_per_class and num_subjects must be positive");
    if (noise_sigma < 0.0 || subject_shift_sigma < 0.0 || class_amplitude < 0.0 || background_amplitude < 0.0)
        throw ValueError("synthetic amplitudes and sigmas must be non-negative");
}

SynthConfig SynthConfig::four_class() {
    SynthConfig c;
    c.num_classes = 4;
    c.channels = 16;
    c.class_amplitude = 0.1;
    c.noise_sigma = 0.355;
    return c;
}

double class_frequency(std::size_t k, std::size_t num_classes, std::size_t samples) {
    const double T = static_cast<double>(samples);
    return T / 8.0 + static_cast<double>(k) * 3.0 * T / (8.0 * static_cast<double>(num_classes));
}

double background_frequency(std::size_t samples) { return static_cast<double>(samples) / 32.0; }

TrialSet gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t K = cfg.num_classes, C = cfg.channels, T = cfg.samples;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    auto shape_rng = make_rng(cfg.seed, 1);
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    std::vector<double> background_phase(C);
    for (auto& p : background_phase) p = phase(shape_rng);
    std::vector<double> class_phase(K * C);
    for (auto& p : class_phase) p = phase(shape_rng);

    // Deterministic part of each class: background + a * template_k.
    std::vector<TrialMatrix> clean(K, TrialMatrix(C, T));
    const double f_bg = background_frequency(T);
    for (std::size_t k = 0; k < K; ++k) {
        const double f = class_frequency(k, K, T);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < T; ++t) {
                const double u = static_cast<double>(t) / static_cast<double>(T);
                clean[k](c, t) = cfg.background_amplitude * std::sin(two_pi * f_bg * u + background_phase[c]) +
                                 cfg.class_amplitude * std::sin(two_pi * f * u + class_phase[k * C + c]);
            }
    }

    auto subject_rng = make_rng(cfg.seed, 2);
    std::normal_distribution<double> shift(0.0, 1.0);
    std::vector<double> offsets(cfg.num_subjects * C);
    for (auto& o : offsets) o = cfg.subject_shift_sigma * shift(subject_rng);

    auto noise_rng = make_rng(cfg.seed, 3);
    std::normal_distribution<double> noise(0.0, 1.0);

    TrialSet set;
    for (std::size_t k = 0; k < K; ++k) set.class_names.push_back("class" + std::to_string(k));
    const std::size_t base = cfg.trials_per_class / cfg.num_subjects;
    const std::size_t extra = cfg.trials_per_class % cfg.num_subjects;
    for (std::size_t s = 0; s < cfg.num_subjects; ++s) {
        const std::size_t rounds = base + (s < extra ? 1 : 0);
        for (std::size_t r = 0; r < rounds; ++r)
            for (std::size_t k = 0; k < K; ++k) {
                TrialMatrix trial = clean[k];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t t = 0; t < T; ++t) {
                        const double v = trial(c, t) + offsets[s * C + c] + cfg.noise_sigma * noise(noise_rng);
                        trial(c, t) = static_cast<double>(static_cast<float>(v));
                    }
                set.trials.push_back(std::move(trial));
                set.labels.push_back(static_cast<int>(k));
                set.subjects.push_back(static_cast<int>(s));
            }
    }
    return set;
}

TrialMatrix normalize_trial(const TrialMatrix& trial, const Normalization& mode) {
    TrialMatrix out = trial;
    auto v = out.values();
    switch (mode.kind) {
        case Normalization::Kind::MeanShiftClip: {
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            for (auto& x : v) x = std::clamp((x - mean) / 10.0, -5.0, 5.0);
            break;
        }
        case Normalization::Kind::ZScore: {
            const double n = static_cast<double>(v.size());
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            const double sd = std::max(std::sqrt(var / n), 1e-8);
            for (auto& x : v) x = (x - mean) / sd;
            break;
        }
        case Normalization::Kind::EmaStandardize: {
            const double d = mode.decay;
            if (!(d > 0.0 && d < 1.0)) throw ValueError("EMA decay must lie in (0, 1)");
            for (std::size_t c = 0; c < out.channels(); ++c) {
                auto row = out.row(c);
                double mu = row[0];
                double var = 1.0;
                row[0] = 0.0;
                for (std::size_t t = 1; t < row.size(); ++t) {
                    const double x = row[t];
                    mu = d * mu + (1.0 - d) * x;
                    var = d * var + (1.0 - d) * (x - mu) * (x - mu);
                    row[t] = (x - mu) / std::max(std::sqrt(var), 1e-8);
                }
            }
            break;
        }
    }
    return out;
}

TrialSet normalize(const TrialSet& set, const Normalization& mode) {
    if (set.empty()) throw ValueError("cannot normalize an empty trial set");
    TrialSet out = set;
    for (auto& t : out.trials) t = normalize_trial(t, mode);
    return out;
}

std::vector<int> subject_ids(const TrialSet& set) {
    std::set<int> ids(set.subjects.begin(), set.subjects.end());
    return {ids.begin(), ids.end()};
}

SplitPlan within_subject_blocks(const TrialSet& set) {
    SplitPlan plan;
    plan.kind = SplitKind::WithinSubjectBlocks;
    plan.block.assign(set.size(), -1);
    for (int subject : subject_ids(set)) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < set.size(); ++i)
            if (set.subjects[i] == subject) members.push_back(i);
        const std::size_t n = members.size();
        if (n < static_cast<std::size_t>(kWithinSubjectBlocks))
            throw ValueError("subject " + std::to_string(subject) + " has " + std::to_string(n) +
                             " trials; within-subject blocks need at least 5");
        const std::size_t base = n / kWithinSubjectBlocks, extra = n % kWithinSubjectBlocks;
        std::size_t pos = 0;
        for (int b = 0; b < kWithinSubjectBlocks; ++b) {
            const std::size_t len = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
            for (std::size_t i = 0; i < len; ++i) plan.block[members[pos++]] = b;
        }
    }
    return plan;
}

Split within_subject_fold(const TrialSet& set, const SplitPlan& plan, int fold) {
    if (plan.kind != SplitKind::WithinSubjectBlocks || plan.block.size() != set.size())
        throw ValueError("split plan does not describe within-subject blocks of this set");
    if (fold < 0 || fold >= kWithinSubjectBlocks) throw ValueError("fold must lie in [0, 5)");
    const int val_block = (fold + 1) % kWithinSubjectBlocks;
    std::vector<std::size_t> train, val, test;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (plan.block[i] == fold)
            test.push_back(i);
        else if (plan.block[i] == val_block)
            val.push_back(i);
        else
            train.push_back(i);
    }
    return {set.subset(train), set.subset(val), set.subset(test)};
}

Split loso_split(const TrialSet& set, int test_subject, std::uint64_t seed) {
    const auto ids = subject_ids(set);
    if (ids.size() < 2) throw ValueError("leave-one-subject-out needs at least 2 subjects");
    if (std::find(ids.begin(), ids.end(), test_subject) == ids.end())
        throw ValueError("unknown subject id " + std::to_string(test_subject));
    std::vector<std::size_t> rest, test;
    for (std::size_t i = 0; i < set.size(); ++i) (set.subjects[i] == test_subject ? test : rest).push_back(i);
    std::mt19937_64 rng(seed);
    std::shuffle(rest.begin(), rest.end(), rng);
    const std::size_t n_val = rest.size() / 4;
    const std::size_t n_train = rest.size() - n_val;
    std::vector<std::size_t> train(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
    return {set.subset(train), set.subset(val), set.subset(test)};
}

// ---------------------------------------------------------------------------
// Trial file

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".meta.json");
}

void write_trials(const TrialSet& set, const std::filesystem::path& path) {
    set.validate();
    const auto C = static_cast<std::uint32_t>(set.channels());
    const auto T = static_cast<std::uint32_t>(set.samples());
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write("EEGB", 4);
        binio::put_uint<std::uint16_t>(out, 1);
        binio::put_uint<std::uint32_t>(out, C);
        binio::put_uint<std::uint32_t>(out, T);
        binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
        for (const auto& trial : set.trials)
            for (double v : trial.values()) binio::put_f32(out, static_cast<float>(v));
        if (!out) throw std::runtime_error("failed writing " + path.string());
    }
    nlohmann::ordered_json meta = {{"labels", set.labels}, {"subjects", set.subjects}, {"classes", set.class_names}};
    std::ofstream side(sidecar_path(path), std::ios::binary);
    if (!side) throw std::runtime_error("cannot write " + sidecar_path(path).string());
    side << meta.dump() << '\n';
}

TrialSet read_trials(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    binio::Reader r(in, path.string());
    r.expect_magic("EEGB");
    if (const auto version = r.uint<std::uint16_t>(); version != 1)
        throw FormatError(path.string() + ": unsupported trial file version " + std::to_string(version));
    const std::size_t C = r.uint<std::uint32_t>();
    const std::size_t T = r.uint<std::uint32_t>();
    const std::size_t n = r.uint<std::uint32_t>();
    if (n > 0 && (C == 0 || T == 0)) throw FormatError(path.string() + ": zero channels or samples");

    TrialSet set;
    set.trials.reserve(n);
    std::vector<double> values(C * T);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : values) {
            v = static_cast<double>(r.f32());
            if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value in trial " + std::to_string(i));
        }
        set.trials.emplace_back(C, T, values);
    }
    r.expect_end();

    std::ifstream side(sidecar_path(path), std::ios::binary);
    if (!side) throw FormatError("missing sidecar " + sidecar_path(path).string());
    try {
        auto meta = nlohmann::json::parse(side);
        set.labels = meta.at("labels").get<std::vector<int>>();
        set.subjects = meta.at("subjects").get<std::vector<int>>();
        set.class_names = meta.at("classes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(sidecar_path(path).string() + ": " + e.what());
    }
    if (set.labels.size() != n || set.subjects.size() != n)
        throw FormatError(path.string() + ": header declares n=" + std::to_string(n) + " but sidecar lists " +
                          std::to_string(set.labels.size()) + " labels and " + std::to_string(set.subjects.size()) +
                          " subjects");
    for (int y : set.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= set.class_names.size())
            throw FormatError(path.string() + ": label " + std::to_string(y) + " outside the class list");
    return set;
}

}  // namespace uapforge
