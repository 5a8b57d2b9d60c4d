#pragma once

// Parameter checkpoints: `<prefix>.json` holds a header (caller metadata plus
// a tensor table of names, shapes and element offsets) and `<prefix>.bin`
// holds the float64 values back to back, little-endian.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causalign/autodiff.hpp"

namespace causalign {

struct NamedTensor {
  std::string name;
  ad::Matrix value;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;

  // Throws IoError naming the missing tensor.
  const ad::Matrix& at(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& prefix, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& prefix);

}  // namespace causalign
