#pragma once

#include <vector>

#include "kgt/sequence.hpp"

namespace kgt {

struct PretrainItem {
  TripleSequence seq;
  EntityId center = 0;
  // MEM only: negative entities per mask record, none equal to the target.
  std::vector<std::vector<EntityId>> mem_negatives;
  // EPM only.
  int epm_label = -1;
};

}  // namespace kgt
