#include "shadow/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace shadow {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are written in host byte order");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kPayload = "payload.bin";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SchemaError(p.string(), "cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir) {
  std::string payload;
  json tensors = json::array();
  for (const auto& t : ckpt.tensors) {
    if (nn::numel(t.shape) != t.data.size()) {
      throw DimensionError("checkpoint tensor " + t.name + ": shape " + nn::shape_str(t.shape) + " holds " +
                           std::to_string(nn::numel(t.shape)) + " values, data has " + std::to_string(t.data.size()));
    }
    const std::size_t offset = payload.size();
    payload.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(double));
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", "f64"}, {"offset", offset},
                       {"bytes", t.data.size() * sizeof(double)}});
  }
  json manifest = {{"format", "shadow-checkpoint"},
                   {"version", 1},
                   {"tensors", tensors},
                   {"config", ckpt.config},
                   {"meta", ckpt.meta},
                   {"rng_state", ckpt.rng_state},
                   {"iteration", ckpt.iteration},
                   {"payload_bytes", payload.size()},
                   {"payload_sha256", sha256_hex(payload.data(), payload.size())}};
  fs::create_directories(dir);
  write_file(fs::path(dir) / kPayload, payload);
  write_file(fs::path(dir) / kManifest, manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  const json m = detail::parse_document(read_file(fs::path(dir) / kManifest), "checkpoint manifest");
  const std::string payload = read_file(fs::path(dir) / kPayload);

  if (detail::as_string(detail::require(m, "$", "format"), "$.format") != "shadow-checkpoint") {
    throw SchemaError("$.format", "not a checkpoint manifest");
  }
  const auto expected_bytes = static_cast<std::size_t>(detail::as_number(detail::require(m, "$", "payload_bytes"), "$.payload_bytes"));
  if (payload.size() != expected_bytes) {
    throw SchemaError("$.payload_bytes", "manifest says " + std::to_string(expected_bytes) + " bytes, payload has " +
                                             std::to_string(payload.size()));
  }
  const std::string hash = detail::as_string(detail::require(m, "$", "payload_sha256"), "$.payload_sha256");
  if (hash != sha256_hex(payload.data(), payload.size())) {
    throw SchemaError("$.payload_sha256", "payload hash mismatch");
  }

  Checkpoint ck;
  ck.config = m.value("config", json::object());
  ck.meta = m.value("meta", json::object());
  ck.rng_state = detail::as_string(detail::require(m, "$", "rng_state"), "$.rng_state");
  ck.iteration = detail::require(m, "$", "iteration").get<std::int64_t>();
  const json& ts = detail::require(m, "$", "tensors");
  if (!ts.is_array()) throw SchemaError("$.tensors", "expected an array");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string p = "$.tensors[" + std::to_string(i) + "]";
    const json& t = ts[i];
    const std::string dtype = detail::as_string(detail::require(t, p, "dtype"), p + ".dtype");
    if (dtype != "f64") throw SchemaError(p + ".dtype", "unsupported dtype '" + dtype + "' (expected f64)");
    CheckpointTensor ct;
    ct.name = detail::as_string(detail::require(t, p, "name"), p + ".name");
    for (double d : detail::as_numbers(detail::require(t, p, "shape"), p + ".shape")) {
      ct.shape.push_back(static_cast<std::size_t>(d));
    }
    const auto offset = detail::require(t, p, "offset").get<std::size_t>();
    const auto bytes = detail::require(t, p, "bytes").get<std::size_t>();
    if (bytes != nn::numel(ct.shape) * sizeof(double)) {
      throw SchemaError(p + ".bytes", "length does not match shape " + nn::shape_str(ct.shape));
    }
    if (offset > payload.size() || bytes > payload.size() - offset) {
      throw SchemaError(p + ".offset", "tensor extends past the payload");
    }
    ct.data.resize(nn::numel(ct.shape));
    std::memcpy(ct.data.data(), payload.data() + offset, bytes);
    ck.tensors.push_back(std::move(ct));
  }
  return ck;
}

void export_params(const nn::ParamList& params, const std::string& prefix, std::vector<CheckpointTensor>& out) {
  for (const auto& p : params) {
    auto d = p.tensor.data();
    out.push_back({prefix + p.name, p.tensor.shape(), std::vector<double>(d.begin(), d.end())});
  }
}

void import_params(const Checkpoint& ckpt, const std::string& prefix, nn::ParamList& params) {
  for (auto& p : params) {
    const CheckpointTensor* t = ckpt.find(prefix + p.name);
    if (!t) throw DimensionError("checkpoint has no tensor " + prefix + p.name);
    if (t->shape != p.tensor.shape()) {
      throw DimensionError("checkpoint tensor " + prefix + p.name + " has shape " + nn::shape_str(t->shape) +
                           ", network expects " + nn::shape_str(p.tensor.shape()));
    }
    std::copy(t->data.begin(), t->data.end(), p.tensor.data().begin());
  }
}

}  // namespace shadow
