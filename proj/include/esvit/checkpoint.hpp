#pragma once

// Weight checkpoint container: a JSON document mapping parameter paths to
// shapes and flat row-major values.
//
//   {"format": "esvit-checkpoint", "version": 1, "metadata": {...},
//    "parameters": [{"path": "...", "shape": [...], "values": [...]}, ...]}

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "esvit/tensor.hpp"

namespace esvit {

inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string path;
  autograd::Tensor tensor;
};

struct Checkpoint {
  int version = kCheckpointVersion;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> parameters;

  const NamedTensor* find(const std::string& path) const;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace esvit
