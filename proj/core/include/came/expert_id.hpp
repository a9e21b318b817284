#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace came {

/// The three relevance experts.
enum class ExpertId { kLex = 0, kLoc = 1, kGlob = 2 };

inline constexpr std::size_t kNumExperts = 3;
inline constexpr std::array<ExpertId, kNumExperts> kAllExperts = {ExpertId::kLex, ExpertId::kLoc, ExpertId::kGlob};

constexpr std::size_t index_of(ExpertId e) { return static_cast<std::size_t>(e); }

std::string_view to_string(ExpertId e);
/// Parses "lex", "loc" or "glob"; throws std::invalid_argument otherwise.
ExpertId parse_expert(std::string_view name);

}  // namespace came
