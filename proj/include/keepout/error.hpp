#pragma once

#include <stdexcept>
#include <string>

namespace keepout {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorKind { usage = 2, validation = 3, io = 4, numeric = 5 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

} // namespace keepout
