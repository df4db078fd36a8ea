#pragma once

#include <stdexcept>
#include <string>

namespace fnsr {

// A mathematical invariant or feasibility condition failed (CLI exit 1).
class invariant_error : public std::runtime_error {
public:
    explicit invariant_error(const std::string& what) : std::runtime_error(what) {}
};

// The requested computation does not fit the grid or scale budget (CLI exit 3).
class resolution_error : public std::runtime_error {
public:
    explicit resolution_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fnsr
