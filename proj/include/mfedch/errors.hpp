#pragma once
#include <stdexcept>
#include <string>
#include <string_view>

namespace mfedch {

enum class ErrorKind {
    usage,
    config,
    parse,
    alignment,
    size,
    shape,
    index,
    precondition,
    numeric,
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::usage: return "usage_error";
        case ErrorKind::config: return "config_error";
        case ErrorKind::parse: return "parse_error";
        case ErrorKind::alignment: return "alignment_error";
        case ErrorKind::size: return "size_error";
        case ErrorKind::shape: return "shape_error";
        case ErrorKind::index: return "index_error";
        case ErrorKind::precondition: return "precondition_error";
        case ErrorKind::numeric: return "numeric_error";
    }
    return "error";
}

/*
 * Process exit code for an error category:
 * 1 usage/config, 2 data, 3 numeric.
 */
inline int exit_code(ErrorKind kind)
{
    switch (kind) {
        case ErrorKind::usage:
        case ErrorKind::config:
            return 1;
        case ErrorKind::numeric:
            return 3;
        default:
            return 2;
    }
}

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

} // namespace mfedch
