#include "mvp/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "mvp/config.h"

namespace mvp {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

ParamSet ToFloat32(const ParamSet& params) {
  ParamSet out = params;
  for (auto& [name, t] : out.tensors()) {
    for (double& v : t.values()) v = static_cast<float>(v);
  }
  return out;
}

std::string ParamHash(const ParamSet& params) {
  std::string bytes;
  for (const auto& [name, t] : params.tensors()) {
    bytes += name;
    bytes += ShapeToString(t.shape());
    for (double v : t.storage()) {
      const float f = static_cast<float>(v);
      char b[4];
      std::memcpy(b, &f, 4);
      bytes.append(b, 4);
    }
  }
  return Fnv1aHex(bytes);
}

void SaveCheckpoint(const Checkpoint& ck, const fs::path& dir) {
  const fs::path tmp = dir.string() + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
    json index = json::array();
    int64_t offset = 0;
    {
      std::ofstream bin(tmp / "params.bin", std::ios::binary);
      if (!bin) throw std::runtime_error("cannot create " + (tmp / "params.bin").string());
      for (const auto& [name, t] : ck.params.tensors()) {
        std::vector<float> buf(t.storage().begin(), t.storage().end());
        bin.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset},
                         {"count", t.size()}});
        offset += t.size() * static_cast<int64_t>(sizeof(float));
      }
      bin.flush();
      if (!bin) throw std::runtime_error("write failed: " + (tmp / "params.bin").string());
    }
    json manifest = {{"format", "mvp-checkpoint-v1"},
                     {"config_hash", ck.config_hash},
                     {"step", ck.step},
                     {"metrics", ck.metrics},
                     {"param_hash", ParamHash(ck.params)},
                     {"config", ck.config},
                     {"tensors", index},
                     {"bytes", offset}};
    {
      std::ofstream out(tmp / "manifest.json");
      out << manifest.dump(2) << "\n";
      out.flush();
      if (!out) throw std::runtime_error("write failed: " + (tmp / "manifest.json").string());
    }
    fs::remove_all(dir, ec);
    fs::rename(tmp, dir);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

Checkpoint LoadCheckpoint(const fs::path& dir, bool force,
                          const std::string& expected_hash) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw CheckpointError("missing manifest in " + dir.string());
  json m;
  try {
    in >> m;
  } catch (const json::parse_error& e) {
    throw CheckpointError("corrupt manifest in " + dir.string() + ": " + e.what());
  }
  Checkpoint ck;
  ck.config = m.at("config");
  ck.config_hash = m.at("config_hash").get<std::string>();
  ck.step = m.at("step").get<int64_t>();
  ck.metrics = m.value("metrics", json::object());
  if (!force) {
    const std::string actual = ConfigHash(RunConfigFromJson(ck.config));
    if (actual != ck.config_hash) {
      throw CheckpointError("config hash mismatch in " + dir.string() +
                            ": manifest says " + ck.config_hash +
                            ", config hashes to " + actual + " (use --force)");
    }
    if (!expected_hash.empty() && expected_hash != ck.config_hash) {
      throw CheckpointError("checkpoint config hash " + ck.config_hash +
                            " does not match expected " + expected_hash +
                            " (use --force)");
    }
  }
  const fs::path bin_path = dir / "params.bin";
  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw CheckpointError("missing " + bin_path.string());
  const int64_t file_size = bin.tellg();
  for (const auto& entry : m.at("tensors")) {
    const std::string name = entry.at("name");
    const Shape shape = entry.at("shape").get<Shape>();
    const int64_t offset = entry.at("offset");
    const int64_t count = entry.at("count");
    if (NumElements(shape) != count) {
      throw CheckpointError("tensor '" + name + "' index count disagrees with shape", name);
    }
    const int64_t end = offset + count * static_cast<int64_t>(sizeof(float));
    if (offset < 0 || end > file_size) {
      throw CheckpointError("params.bin truncated: tensor '" + name + "' needs bytes [" +
                                std::to_string(offset) + ", " + std::to_string(end) +
                                ") but file has " + std::to_string(file_size),
                            name);
    }
    std::vector<float> buf(count);
    bin.seekg(offset);
    bin.read(reinterpret_cast<char*>(buf.data()), count * sizeof(float));
    if (!bin) throw CheckpointError("read failed for tensor '" + name + "'", name);
    Tensor t(shape);
    for (int64_t i = 0; i < count; ++i) t[i] = buf[i];
    ck.params.Add(name, std::move(t));
  }
  if (m.contains("bytes") && m.at("bytes").get<int64_t>() != file_size) {
    throw CheckpointError("params.bin is " + std::to_string(file_size) +
                          " bytes, manifest expects " +
                          std::to_string(m.at("bytes").get<int64_t>()));
  }
  return ck;
}

void ApplyCheckpoint(const Checkpoint& ck, ParamSet& target) {
  for (const auto& [name, t] : ck.params.tensors()) {
    if (!target.Contains(name)) {
      throw CheckpointError("unknown tensor '" + name + "' in checkpoint", name);
    }
    Tensor& dst = target.Mutable(name);
    if (dst.shape() != t.shape()) {
      throw CheckpointError("tensor '" + name + "' has shape " + ShapeToString(t.shape()) +
                                ", model expects " + ShapeToString(dst.shape()),
                            name);
    }
    dst = t;
  }
}

}  // namespace mvp
