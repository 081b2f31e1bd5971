#pragma once

#include <stdexcept>
#include <string>

namespace ramanml {

// Base for everything thrown by this library. Subclasses group into the
// CLI exit-code categories: usage/config, data, numeric/model.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- data errors ---------------------------------------------------------
class FileError : public Error {
public:
    using Error::Error;
};
class GridError : public Error {
public:
    using Error::Error;
};
class EmptyDatasetError : public Error {
public:
    using Error::Error;
};
class DegenerateSpectrumError : public Error {
public:
    using Error::Error;
};
class FoldError : public Error {
public:
    using Error::Error;
};

// --- usage/config errors --------------------------------------------------
class ConfigError : public Error {
public:
    using Error::Error;
};
class DimensionMismatchError : public Error {
public:
    using Error::Error;
};
class ShapeMismatchError : public Error {
public:
    using Error::Error;
};
class LengthMismatchError : public Error {
public:
    using Error::Error;
};
class DomainError : public Error {
public:
    using Error::Error;
};
class OrderTooLargeError : public Error {
public:
    using Error::Error;
};
class InvalidPartitionError : public Error {
public:
    using Error::Error;
};

// --- numeric / model errors ------------------------------------------------
class DegenerateDataError : public Error {
public:
    using Error::Error;
};
class NonConvergenceError : public Error {
public:
    using Error::Error;
};
class NumericalDivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace ramanml
