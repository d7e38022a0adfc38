#include "grex/reference_policy.h"

namespace grex {
namespace {

bool IsLetter(std::string_view atom) {
  return atom == "a" || atom == "b" || atom == "c";
}

}  // namespace

double SimpleJsonReferencePolicy::Score(std::string_view left,
                                        std::string_view right,
                                        ActionKind kind) const {
  switch (kind) {
    case ActionKind::kSubgrammarLeft:
      if (left == "{" && IsLetter(right)) return 5.0;
      if (left == "{" && right == "{G}") return 3.0;
      if (left == "{") return 2.0;
      return 0.0;
    case ActionKind::kRegular:
      if (left == "{G" && right == "}") return 4.0;
      if (right == "}") return 1.5;
      return 1.0;
    case ActionKind::kAnchoredLeft:
      if (left == "{G" && right == "{G}") return 2.5;
      return 0.0;
    default:
      return 0.0;
  }
}

}  // namespace grex
