#pragma once

#include <stdexcept>
#include <string>

namespace lcirt {

// Bad input: malformed files, out-of-range codes, inconsistent model specs.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A parameter point the model cannot evaluate (zero manifest probability,
// singular systems that regularization could not rescue).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lcirt
