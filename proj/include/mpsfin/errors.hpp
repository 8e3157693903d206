#pragma once

#include <stdexcept>
#include <string>

namespace mpsfin {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated a documented precondition or supplied inconsistent data
// (out-of-range symbol, shape mismatch, degenerate input, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed or unreadable files (bad magic, truncated body, unparsable CSV).
class IoError : public Error {
public:
    using Error::Error;
};

// Numerical breakdown: SVD non-convergence, zero-amplitude sample, exploded
// gradient step, implied volatility outside its no-arbitrage bounds.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace mpsfin
