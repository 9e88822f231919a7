#pragma once

#include <string_view>

namespace coverassert {

// True for every SystemVerilog (IEEE 1800-2017) reserved word.
bool is_sv_keyword(std::string_view word) noexcept;

}  // namespace coverassert
