#pragma once

#include <string>

#include <fmt/format.h>

namespace mzchain {

/// Fixed 12-significant-digit rendering with trailing zeros kept, independent of locale.
inline std::string format_number(double value) {
    if (value == 0.0) value = 0.0;  // drop the sign of -0
    return fmt::format("{:#.12g}", value);
}

}  // namespace mzchain
