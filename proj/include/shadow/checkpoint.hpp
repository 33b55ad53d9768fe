#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadow/nn.hpp"

namespace shadow {

struct CheckpointTensor {
  std::string name;
  nn::Shape shape;
  std::vector<double> data;
};

/// A checkpoint directory holds manifest.json (tensor names, shapes, dtype,
/// byte offsets, config snapshot, RNG state, iteration and a SHA-256 of the
/// payload) and payload.bin (the tensors as little-endian f64, back to back).
struct Checkpoint {
  std::vector<CheckpointTensor> tensors;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json meta = nlohmann::json::object();
  std::string rng_state;
  std::int64_t iteration = 0;

  const CheckpointTensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir);
/// Throws SchemaError on a malformed manifest, a dtype other than f64, a
/// payload whose length or hash disagrees with the manifest.
Checkpoint load_checkpoint(const std::string& dir);

std::string sha256_hex(const void* data, std::size_t size);

/// Parameters to checkpoint tensors, names prefixed.
void export_params(const nn::ParamList& params, const std::string& prefix, std::vector<CheckpointTensor>& out);
/// Copies values from `ckpt` into `params` by prefixed name. Missing names or
/// shape mismatches throw DimensionError.
void import_params(const Checkpoint& ckpt, const std::string& prefix, nn::ParamList& params);

}  // namespace shadow
