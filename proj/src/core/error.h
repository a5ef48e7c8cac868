#pragma once

#include <stdexcept>
#include <string>

namespace t3m {

// Error categories map 1:1 onto CLI exit codes / C API status values.
enum class ErrorKind {
    usage      = 2,  // bad arguments / flags
    config     = 3,  // invalid configuration, stage-order or checkpoint mismatch
    data       = 4,  // bad file contents, shape mismatches, out-of-range values
    divergence = 5,  // training produced non-finite loss
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::config, msg) {}
};
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error(ErrorKind::divergence, msg) {}
};

}  // namespace t3m
