#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kgt {

struct CheckpointTensor {
  std::string name;
  std::string group;
  std::vector<size_t> shape;
  bool frozen = false;
  std::vector<double> data;
};

// Named-tensor container. On disk: magic, a JSON manifest (names, groups,
// shapes, frozen flags, RNG state, step counter, free-form meta), then the
// raw little-endian float64 buffers in manifest order.
struct Checkpoint {
  int64_t step = 0;
  std::string rng_state;
  std::map<std::string, std::string> meta;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace kgt
