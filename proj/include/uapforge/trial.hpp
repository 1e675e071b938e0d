#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace uapforge {

// One C x T multichannel segment, stored channel-major (time within channel).
class TrialMatrix {
public:
    TrialMatrix() = default;
    TrialMatrix(std::size_t channels, std::size_t samples, double fill = 0.0);
    TrialMatrix(std::size_t channels, std::size_t samples, std::vector<double> values);

    std::size_t channels() const { return channels_; }
    std::size_t samples() const { return samples_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(std::size_t c, std::size_t t) { return values_[c * samples_ + t]; }
    double operator()(std::size_t c, std::size_t t) const { return values_[c * samples_ + t]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> row(std::size_t c) { return {values_.data() + c * samples_, samples_}; }
    std::span<const double> row(std::size_t c) const { return {values_.data() + c * samples_, samples_}; }

    bool same_shape(const TrialMatrix& other) const {
        return channels_ == other.channels_ && samples_ == other.samples_;
    }

    friend bool operator==(const TrialMatrix&, const TrialMatrix&) = default;

private:
    std::size_t channels_ = 0;
    std::size_t samples_ = 0;
    std::vector<double> values_;
};

// Ordered trials sharing one shape, with a label and subject id per trial.
struct TrialSet {
    std::vector<TrialMatrix> trials;
    std::vector<int> labels;
    std::vector<int> subjects;
    std::vector<std::string> class_names;

    std::size_t size() const { return trials.size(); }
    bool empty() const { return trials.empty(); }
    std::size_t num_classes() const { return class_names.size(); }
    std::size_t channels() const { return trials.empty() ? 0 : trials.front().channels(); }
    std::size_t samples() const { return trials.empty() ? 0 : trials.front().samples(); }

    // Throws ShapeError / ValueError when the invariants do not hold.
    void validate() const;

    // Trials at the given positions, in that order.
    TrialSet subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const TrialSet&, const TrialSet&) = default;
};

// Population standard deviation over every entry of every trial.
double entry_stddev(const TrialSet& set);

}  // namespace uapforge
