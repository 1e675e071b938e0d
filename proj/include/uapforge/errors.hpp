#pragma once

#include <stdexcept>
#include <string>

namespace uapforge {

// Tensor shapes disagree with what a model, file or operation expects.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A file or document does not follow its declared layout.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation produced a non-finite value or hit a degenerate case.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller passed an argument outside the operation's domain.
class ValueError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace uapforge
