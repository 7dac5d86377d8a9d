#pragma once

#include <stdexcept>
#include <string>

namespace drol {

/// Thrown when a caller breaks a precondition (shape mismatch, missing cache, bad config).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Thrown when a loss or parameter stops being finite.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ContractError(what);
}

} // namespace drol
