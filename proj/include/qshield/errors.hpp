#pragma once

#include <stdexcept>
#include <string>

namespace qshield {

/// Distinct failure kinds for file loading, so callers can tell a bad magic
/// number from a short read from a header/payload disagreement.
enum class io_errc {
    bad_magic,
    truncated,
    shape_mismatch,
    bad_format,
};

class io_error : public std::runtime_error {
public:
    io_error(io_errc kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    io_errc kind() const noexcept { return kind_; }

private:
    io_errc kind_;
};

/// Config validation failure carrying the JSON field path that failed.
class config_error : public std::runtime_error {
public:
    config_error(std::string field, const std::string& msg)
        : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace qshield
