#pragma once

#include <stdexcept>
#include <string>

namespace shuttlechain {

inline constexpr const char* version_string = "1.0.0";

// Error taxonomy mirrors the CLI exit codes: config problems (2), numerical
// failures (3). Partial sweeps are reported through result flags, not thrown.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : error {
    using error::error;
};

struct numerical_error : error {
    using error::error;
};

struct invalid_input : error {
    using error::error;
};

}  // namespace shuttlechain
