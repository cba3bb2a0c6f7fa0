#pragma once

#include <array>
#include <cstdint>

// Values frozen from the first build. Tests and the acceptance binary diff
// against these; regenerate with `msow bench eq-growth` when the generators
// change on purpose.
namespace msow::pinned {

/// Expanded node counts of eq(0..3).
inline constexpr std::array<std::uint64_t, 4> eq_sizes{122, 2267, 17282, 122387};
/// floor(size(eq(d+1)) / size(eq(d))) for d = 0, 1, 2.
inline constexpr std::array<std::uint64_t, 3> eq_ratio_floors{18, 7, 7};
/// eq(d-1) occurrences per eq(d) after expanding helpers.
inline constexpr std::uint64_t eq_copies = 7;
/// Minimal automaton sizes at depth 0.
inline constexpr std::uint32_t eq0_states = 26;
inline constexpr std::uint32_t less0_states = 21;

}  // namespace msow::pinned
