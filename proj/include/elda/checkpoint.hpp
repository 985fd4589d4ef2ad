#pragma once

// Binary checkpoint layout (all integers uint64 little-endian):
//
//   "ELDA1"
//   json_length, canonical ModelConfig JSON bytes
//   parameter_count
//   per parameter, sorted by name:
//     name_length, name bytes, rank, dims[rank], float64 values (little-endian)
//
// Loading rejects anything that deviates: wrong magic, malformed JSON, a
// parameter set or shape that disagrees with the configuration, truncation
// or trailing bytes.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "elda/model.hpp"

namespace elda::model {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json config_to_json(const ModelConfig& config);
/// Throws on missing keys, wrong types or an invalid configuration.
ModelConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(std::ostream& os, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(std::istream& is);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace elda::model
