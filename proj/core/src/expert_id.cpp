#include "came/expert_id.hpp"

#include <stdexcept>

namespace came {

std::string_view to_string(ExpertId e) {
  switch (e) {
    case ExpertId::kLex: return "lex";
    case ExpertId::kLoc: return "loc";
    case ExpertId::kGlob: return "glob";
  }
  throw std::invalid_argument("unknown expert id");
}

ExpertId parse_expert(std::string_view name) {
  for (ExpertId e : kAllExperts) {
    if (to_string(e) == name) return e;
  }
  throw std::invalid_argument("unknown expert '" + std::string(name) + "' (expected lex, loc or glob)");
}

}  // namespace came
