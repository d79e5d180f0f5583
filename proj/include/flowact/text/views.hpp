#pragma once

#include <string>
#include <vector>

#include "flowact/common.hpp"
#include "flowact/tensor.hpp"
#include "flowact/text/vocab.hpp"

namespace flowact {

// One named observation slot: rows of `features` become feature tokens.
struct ObsSlot {
  std::string name;
  Tensor features;
};

// An interleave element: either a boundary token or a feature block.
struct TaggedItem {
  int token_id = -1;
  Tensor features;
  bool is_token() const { return token_id >= 0; }
};

// Frames each present view with its boundary token pair, in registration
// order regardless of input order. Absent views are omitted.
inline std::vector<TaggedItem> tag_observation_stream(const std::vector<ObsSlot>& slots,
                                                      const Vocabulary& vocab) {
  for (const auto& s : slots) {
    bool known = false;
    for (const auto& v : registered_views()) known = known || v == s.name;
    if (!known) raise(ErrorKind::invalid_argument, "unregistered view name: " + s.name);
  }
  std::vector<TaggedItem> out;
  for (const auto& view : registered_views()) {
    const ObsSlot* found = nullptr;
    for (const auto& s : slots) {
      if (s.name == view) {
        if (found) raise(ErrorKind::invalid_argument, "duplicate view slot: " + view);
        found = &s;
      }
    }
    if (!found) continue;
    out.push_back({vocab.view_start(view), {}});
    out.push_back({-1, found->features});
    out.push_back({vocab.view_end(view), {}});
  }
  return out;
}

// Number of sequence positions a tagged stream occupies (feature rows plus
// two boundary tokens per present view).
inline int tagged_stream_length(const std::vector<TaggedItem>& items) {
  int n = 0;
  for (const auto& it : items) n += it.is_token() ? 1 : it.features.rows;
  return n;
}

}  // namespace flowact
