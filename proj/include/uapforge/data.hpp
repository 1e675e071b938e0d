#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uapforge/trial.hpp"

namespace uapforge {

// Synthetic EEG-like trials. Each trial of class k from subject s is
//
//   background + class_amplitude * template_k + offset_s + N(0, noise_sigma^2)
//
// where `background` is a slow rhythm shared by every class, template_k is a
// per-channel sinusoid whose frequency and phases depend on k, and offset_s
// is a per-channel DC shift. All waveforms are fixed by `seed`.
struct SynthConfig {
    std::size_t num_classes = 2;
    std::size_t channels = 8;
    std::size_t samples = 64;
    std::size_t trials_per_class = 200;
    std::size_t num_subjects = 4;
    double noise_sigma = 0.36;
    double class_amplitude = 0.2;
    double background_amplitude = 1.0;
    double subject_shift_sigma = 0.1;
    std::uint64_t seed = 7;

    void validate() const;

    // Four classes on 16 channels with a weaker class component.
    static SynthConfig four_class();
};

// Trials are ordered subject by subject; within a subject the classes are
// interleaved (0, 1, ..., K-1, 0, 1, ...). Values are rounded to single
// precision so a generated set survives the trial file unchanged.
TrialSet gen_synthetic(const SynthConfig& config);

// Cycles per trial of the class-k template and of the shared background.
double class_frequency(std::size_t k, std::size_t num_classes, std::size_t samples);
double background_frequency(std::size_t samples);

struct Normalization {
    enum class Kind { MeanShiftClip, ZScore, EmaStandardize };
    Kind kind = Kind::ZScore;
    double decay = 0.999;  // EmaStandardize only

    static Normalization mean_shift_clip() { return {Kind::MeanShiftClip, 0.0}; }
    static Normalization zscore() { return {Kind::ZScore, 0.0}; }
    static Normalization ema(double decay = 0.999) { return {Kind::EmaStandardize, decay}; }
};

TrialMatrix normalize_trial(const TrialMatrix& trial, const Normalization& mode);
TrialSet normalize(const TrialSet& set, const Normalization& mode);

enum class SplitKind { WithinSubjectBlocks, LeaveOneSubjectOut };

struct SplitPlan {
    SplitKind kind = SplitKind::WithinSubjectBlocks;
    std::vector<int> block;  // WithinSubjectBlocks: block index in [0, 5) per trial
    int test_subject = -1;   // LeaveOneSubjectOut
};

struct Split {
    TrialSet train;
    TrialSet val;
    TrialSet test;

    friend bool operator==(const Split&, const Split&) = default;
};

inline constexpr int kWithinSubjectBlocks = 5;

// Contiguous blocks in recorded order, per subject; the first (n mod 5)
// blocks take one extra trial.
SplitPlan within_subject_blocks(const TrialSet& set);

// Fold f tests on block f, validates on block (f + 1) mod 5 and trains on the
// remaining three, pooled over subjects.
Split within_subject_fold(const TrialSet& set, const SplitPlan& plan, int fold);

// Test on one subject; the others are pooled, shuffled with `seed`, and cut
// so validation gets floor(25%) and training the rest.
Split loso_split(const TrialSet& set, int test_subject, std::uint64_t seed);

std::vector<int> subject_ids(const TrialSet& set);

// Binary "EEGB" payload plus a JSON sidecar at path + ".meta.json".
void write_trials(const TrialSet& set, const std::filesystem::path& path);
TrialSet read_trials(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace uapforge
