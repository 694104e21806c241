#pragma once

#include <stdexcept>
#include <string>

namespace dklvae {

/// Coarse failure categories. The CLI prints the category name as the
/// machine-parsable prefix of its one-line error message.
enum class ErrorKind {
    shape,    // dimension / length mismatch
    numeric,  // non-PD matrix, ill-conditioned kernel, non-finite values
    config,   // invalid configuration or arguments
    io,       // file system failures
    format,   // corrupt or incompatible on-disk artifacts
    data,     // invalid dataset contents
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape: return "shape";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::data: return "data";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace dklvae
