#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>

#include "sidewalk/policy.hpp"

namespace sidewalk {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MalformedCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ArchitectureMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct TrainingMetadata {
  long episodes = 0;
  std::uint64_t seed = 0;
  bool risk_averse = false;
};

struct Checkpoint {
  PolicyParams params;
  std::optional<OptimizerState> optimizer;
  TrainingMetadata metadata;
};

// JSON document; every double is stored as a C99 hex-float string so that a
// save/load round trip is bit-exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// When expected is given, a checkpoint with a different architecture raises
// ArchitectureMismatchError.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<PolicyArchitecture>& expected = std::nullopt);

std::string format_hex_double(double value);
double parse_hex_double(const std::string& text);

}  // namespace sidewalk
