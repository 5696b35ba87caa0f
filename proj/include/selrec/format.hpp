#pragma once

#include <charconv>
#include <cstddef>
#include <string>
#include <system_error>

namespace selrec {

// Shortest decimal string that round-trips the exact double value.
// Used for every numeric field we serialize so that re-runs are
// byte-identical across machines.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_size(std::size_t v) {
    return std::to_string(v);
}

}  // namespace selrec
