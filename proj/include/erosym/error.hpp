#pragma once

#include <stdexcept>
#include <string>

namespace erosym {

// Error taxonomy mirrors the CLI exit codes: usage 2, refusal 3, data 4,
// internal 5. Transport/auth failures are data-layer errors for exit-code
// purposes but kept distinct so callers can tell them apart.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct UsageError : Error {
    using Error::Error;
};

struct RefusalError : Error {
    using Error::Error;
};

// Malformed files, schema violations, bad labels, dimension mismatches.
struct DataError : Error {
    using Error::Error;
};

struct ParseError : DataError {
    ParseError(const std::string& msg, std::size_t line_number)
        : DataError(msg + " (line " + std::to_string(line_number) + ")"),
          line(line_number) {}
    std::size_t line;
};

struct TransportError : Error {
    explicit TransportError(const std::string& msg, int http_status = 0)
        : Error(msg), status(http_status) {}
    int status;
};

struct AuthError : TransportError {
    explicit AuthError(const std::string& msg, int http_status)
        : TransportError(msg, http_status) {}
};

} // namespace erosym
