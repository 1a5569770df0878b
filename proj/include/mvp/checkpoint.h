#ifndef MVP_CHECKPOINT_H_
#define MVP_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "mvp/params.h"

namespace mvp {

// Directory with manifest.json (config, config hash, step, metric snapshot,
// tensor index) and params.bin (little-endian float32, tensors back to back
// in name order). Parameters are held at float32 precision so a save/load
// round trip is bit-exact.
struct Checkpoint {
  nlohmann::json config;
  std::string config_hash;
  int64_t step = 0;
  nlohmann::json metrics = nlohmann::json::object();
  ParamSet params;
};

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(const std::string& what, std::string tensor = "")
      : std::runtime_error(what), tensor_(std::move(tensor)) {}
  // Offending tensor name, empty when the failure is not tensor-specific.
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

// Rounds every value to the nearest float32.
ParamSet ToFloat32(const ParamSet& params);

// Hash of names, shapes and float32 bits; 16 hex digits.
std::string ParamHash(const ParamSet& params);

// Writes into a temporary sibling directory and renames it into place; a
// failed write removes the partial directory and rethrows.
void SaveCheckpoint(const Checkpoint& checkpoint,
                    const std::filesystem::path& dir);

// Verifies that the manifest's config hash matches its recorded config (and
// `expected_hash`, when given) unless `force`.
Checkpoint LoadCheckpoint(const std::filesystem::path& dir, bool force = false,
                          const std::string& expected_hash = "");

// Copies checkpoint tensors into `target`; names unknown to `target` or
// shape mismatches raise CheckpointError.
void ApplyCheckpoint(const Checkpoint& checkpoint, ParamSet& target);

}  // namespace mvp

#endif  // MVP_CHECKPOINT_H_
