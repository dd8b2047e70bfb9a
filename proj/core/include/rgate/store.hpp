#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgate/engine.hpp"
#include "rgate/tasks.hpp"

namespace rgate {

struct StoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VersionError : StoreError {
  using StoreError::StoreError;
};
struct ShapeError : StoreError {
  using StoreError::StoreError;
};
struct ParseError : StoreError {
  using StoreError::StoreError;
};
struct IoError : StoreError {
  using StoreError::StoreError;
};

/// Training progress carried inside a checkpoint.
struct TrainProgress {
  long epoch = 0;
  std::uint64_t rng_state = 0;
};

/// Line-oriented text checkpoint (`#refined-gates-ckpt v1`). Floats are
/// written with 17 significant digits so a reload reproduces forward
/// outputs bitwise.
void save_checkpoint(const Model& m, const std::string& path,
                     const TrainProgress* progress = nullptr,
                     const OptimizerState* opt = nullptr);

Model load_checkpoint(const std::string& path, TrainProgress* progress = nullptr,
                      OptimizerState* opt = nullptr);

/// Loads into an existing model; throws ShapeError when the stored config
/// does not match m.cfg.
void load_checkpoint_into(Model& m, const std::string& path);

struct MetricsRecord {
  std::string run_id;
  long epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
  std::optional<double> bpc;
  double wall_seconds = 0.0;
  std::string config_hash;
};

/// Appends one self-delimiting key=value record per line.
void append_metrics(const MetricsRecord& r, const std::string& path);
std::vector<MetricsRecord> read_metrics(const std::string& path);

/// FNV-1a hash of the canonical config rendering; stable across runs.
std::string config_hash(const CellConfig& cfg, std::size_t classes, LossKind loss);

// -- dataset files -------------------------------------------------------------
// Header: `#task=<adding|counting> L=<n> seed=<s> version=1`
// adding lines:   a_bits<TAB>b_bits<TAB>s_bits
// counting lines: bits<TAB>count

void write_adding_dataset(const std::vector<AddingSample>& samples, std::size_t len,
                          std::uint64_t seed, const std::string& path);
std::vector<AddingSample> read_adding_dataset(const std::string& path, std::size_t* len = nullptr);

void write_counting_dataset(const std::vector<CountingSample>& samples, std::size_t len,
                            std::uint64_t seed, const std::string& path);
std::vector<CountingSample> read_counting_dataset(const std::string& path,
                                                  std::size_t* len = nullptr);

}  // namespace rgate
