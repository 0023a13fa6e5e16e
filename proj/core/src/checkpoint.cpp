#include "stagan/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "stagan/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace stagan {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in host byte order");

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "tensors.bin";
constexpr const char* kFormat = "stagan-checkpoint";
constexpr int kVersion = 1;

std::string shape_string(torch::IntArrayRef s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory", dir.string());

  json entries = json::array();
  std::ofstream blob(dir / kBlob, std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write checkpoint blob", (dir / kBlob).string());
  std::int64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    const auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    const auto nbytes = t.numel() * static_cast<std::int64_t>(sizeof(float));
    blob.write(reinterpret_cast<const char*>(t.data_ptr<float>()), nbytes);
    entries.push_back({{"name", name}, {"shape", t.sizes().vec()}, {"dtype", "float32"}, {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  blob.close();
  if (!blob) throw IoError("failed writing checkpoint blob", (dir / kBlob).string());

  json manifest{{"format", kFormat},
                {"version", kVersion},
                {"step", ckpt.step},
                {"config", ckpt.config},
                {"rng_state", ckpt.rng_state},
                {"optimizer_steps", ckpt.optimizer_steps},
                {"blob", kBlob},
                {"blob_bytes", offset},
                {"tensors", entries}};
  const auto tmp = dir / (std::string(kManifest) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint manifest", tmp.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("failed writing checkpoint manifest", tmp.string());
  }
  fs::rename(tmp, dir / kManifest, ec);
  if (ec) throw IoError("cannot finalise checkpoint manifest", (dir / kManifest).string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto manifest_path = dir / kManifest;
  std::ifstream in(manifest_path);
  if (!in) throw IoError("checkpoint manifest not found", manifest_path.string());

  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ManifestError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  std::vector<std::tuple<std::string, std::vector<std::int64_t>, std::int64_t, std::int64_t>> layout;
  std::string blob_name;
  try {
    if (manifest.at("format").get<std::string>() != kFormat) throw ManifestError("not a checkpoint manifest");
    if (manifest.at("version").get<int>() != kVersion) throw ManifestError("unsupported checkpoint version");
    ckpt.step = manifest.at("step").get<std::int64_t>();
    ckpt.config = manifest.at("config");
    ckpt.rng_state = manifest.value("rng_state", std::string());
    ckpt.optimizer_steps = manifest.value("optimizer_steps", json::object());
    blob_name = manifest.at("blob").get<std::string>();
    for (const auto& e : manifest.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      const auto dtype = e.at("dtype").get<std::string>();
      if (dtype != "float32") throw DtypeMismatchError("tensor " + name + " has dtype " + dtype + ", expected float32");
      auto shape = e.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = e.at("offset").get<std::int64_t>();
      const auto nbytes = e.at("nbytes").get<std::int64_t>();
      std::int64_t numel = 1;
      for (auto d : shape) {
        if (d < 0) throw ShapeMismatchError("tensor " + name + " has a negative dimension");
        numel *= d;
      }
      if (numel * static_cast<std::int64_t>(sizeof(float)) != nbytes) {
        throw ShapeMismatchError("tensor " + name + " shape " + shape_string(shape) + " does not match its " +
                                 std::to_string(nbytes) + " stored bytes");
      }
      if (offset < 0) throw ManifestError("tensor " + name + " has a negative offset");
      layout.emplace_back(name, std::move(shape), offset, nbytes);
    }
  } catch (const json::exception& e) {
    throw ManifestError("checkpoint manifest is malformed: " + std::string(e.what()));
  }

  const auto blob_path = dir / blob_name;
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw IoError("checkpoint blob not found", blob_path.string());
  const auto blob_size = static_cast<std::int64_t>(fs::file_size(blob_path));
  for (const auto& [name, shape, offset, nbytes] : layout) {
    if (offset + nbytes > blob_size) {
      throw TruncatedBlobError("checkpoint blob holds " + std::to_string(blob_size) + " bytes, tensor " + name +
                               " needs bytes up to " + std::to_string(offset + nbytes));
    }
    auto t = torch::empty(shape, torch::kFloat32);
    blob.seekg(offset);
    blob.read(reinterpret_cast<char*>(t.data_ptr<float>()), nbytes);
    if (!blob) throw TruncatedBlobError("short read for tensor " + name);
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  return ckpt;
}

Checkpoint capture_model(const StaganModel& model, std::int64_t step) {
  Checkpoint ckpt;
  ckpt.config = model.config;
  ckpt.step = step;
  for (const auto& [name, t] : model.named_tensors()) ckpt.tensors.emplace_back(name, t.detach().clone());
  return ckpt;
}

void restore_model(StaganModel& model, const Checkpoint& ckpt) {
  const auto targets = model.named_tensors();
  std::vector<std::string> missing;
  for (const auto& [name, t] : targets) {
    if (!ckpt.find(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    // Summarise per component ("fusion.": 12, ...); the full list travels in the exception.
    std::vector<std::pair<std::string, int>> groups;
    for (const auto& name : missing) {
      const auto prefix = name.substr(0, name.find('.') + 1);
      if (groups.empty() || groups.back().first != prefix) groups.emplace_back(prefix, 0);
      ++groups.back().second;
    }
    std::string list;
    for (const auto& [prefix, n] : groups) list += (list.empty() ? "" : ", ") + prefix + "* (" + std::to_string(n) + ")";
    throw MissingParameterError("checkpoint lacks " + std::to_string(missing.size()) + " model tensors: " + list,
                                missing);
  }
  torch::NoGradGuard no_grad;
  for (const auto& [name, t] : targets) {
    const auto& src = *ckpt.find(name);
    if (src.sizes() != t.sizes()) {
      throw ShapeMismatchError("tensor " + name + " is " + shape_string(src.sizes()) + " in the checkpoint but " +
                               shape_string(t.sizes()) + " in the model");
    }
    // Parameters and buffers are shared handles, so copy_ updates the model in place.
    auto dst = t;
    dst.copy_(src);
  }
}

StaganModel model_from_checkpoint(const Checkpoint& ckpt) {
  TrainConfig cfg;
  try {
    cfg = train_config_from_json(ckpt.config);
  } catch (const ConfigError& e) {
    throw ManifestError(std::string("checkpoint config snapshot is invalid: ") + e.what());
  }
  StaganModel model = build_model(cfg);
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind("embedding.", 0) == 0) {
      model.embedding = EmbeddingModel(8);
      break;
    }
  }
  restore_model(model, ckpt);
  return model;
}

}  // namespace stagan
