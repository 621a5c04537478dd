#include "kgt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "kgt/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace kgt {

namespace {
constexpr char kMagic[8] = {'K', 'G', 'T', 'C', 'K', 'P', 'T', '1'};
}

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const CheckpointTensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["step"] = ckpt.step;
  manifest["rng_state"] = ckpt.rng_state;
  manifest["meta"] = ckpt.meta;
  nlohmann::json tensors = nlohmann::json::array();
  for (const CheckpointTensor& t : ckpt.tensors) {
    tensors.push_back({{"name", t.name},
                       {"group", t.group},
                       {"shape", t.shape},
                       {"frozen", t.frozen}});
  }
  manifest["tensors"] = tensors;
  const std::string body = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint64_t len = body.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  for (const CheckpointTensor& t : ckpt.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string body(len, '\0');
  in.read(body.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint manifest: " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint manifest: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.step = manifest.value("step", int64_t{0});
  ckpt.rng_state = manifest.value("rng_state", std::string{});
  if (manifest.contains("meta")) {
    for (auto& [k, v] : manifest["meta"].items()) {
      ckpt.meta[k] = v.get<std::string>();
    }
  }
  for (const auto& jt : manifest["tensors"]) {
    CheckpointTensor t;
    t.name = jt.at("name").get<std::string>();
    t.group = jt.at("group").get<std::string>();
    t.shape = jt.at("shape").get<std::vector<size_t>>();
    t.frozen = jt.at("frozen").get<bool>();
    size_t total = 1;
    for (size_t d : t.shape) total *= d;
    t.data.resize(total);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint data: " + path);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace kgt
