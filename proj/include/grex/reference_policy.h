#ifndef GREX_REFERENCE_POLICY_H_
#define GREX_REFERENCE_POLICY_H_

#include <string_view>

#include "grex/parse_tree.h"

namespace grex {

// Hand-written Simple-JSON policy. On nominal input it reduces every object
// with the same handful of merges:
//
//   '{G'  -> '{' 'a'      (subgrammar, likewise for 'b' and 'c')
//   '{G}' -> '{G' '}'     (regular)
//   '{G'  -> '{' '{G}'    (subgrammar)
//   '{G'  -> '{G' '{G}'   (anchored, absorbs further siblings)
//
// Anything else falls through to a small set of generic preferences, so that
// corrupted input still parses, just with rules nominal input never uses.
class SimpleJsonReferencePolicy : public Policy {
 public:
  double Score(std::string_view left, std::string_view right,
               ActionKind kind) const override;
};

}  // namespace grex

#endif  // GREX_REFERENCE_POLICY_H_
