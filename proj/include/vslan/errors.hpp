#pragma once

#include <stdexcept>
#include <string>

namespace vslan {

// Error categories map 1:1 onto CLI exit codes (config=2, data=3,
// numeric=4, reward=5).
enum class ErrorKind { config, data, numeric, reward };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string msg)
        : std::runtime_error(std::move(msg)), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::string msg) : Error(ErrorKind::config, std::move(msg)) {}
};

class DataError : public Error {
public:
    enum class Kind { bad_magic, bad_version, truncated, malformed, missing };
    DataError(Kind detail, std::string msg)
        : Error(ErrorKind::data, std::move(msg)), detail_(detail) {}
    Kind detail() const noexcept { return detail_; }

private:
    Kind detail_;
};

class NumericError : public Error {
public:
    explicit NumericError(std::string msg) : Error(ErrorKind::numeric, std::move(msg)) {}
};

class RewardError : public Error {
public:
    explicit RewardError(std::string msg) : Error(ErrorKind::reward, std::move(msg)) {}
};

// Shape contract violations. Treated as numeric failures at the CLI
// boundary but kept distinct so tests can assert on them.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

} // namespace vslan
