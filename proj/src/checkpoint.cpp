#include "esvit/checkpoint.hpp"

#include <fstream>

#include "esvit/error.hpp"

namespace esvit {

using nlohmann::json;

const NamedTensor* Checkpoint::find(const std::string& path) const {
  for (const NamedTensor& p : parameters) {
    if (p.path == path) return &p;
  }
  return nullptr;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json params = json::array();
  for (const NamedTensor& p : ckpt.parameters) {
    params.push_back({{"path", p.path},
                      {"shape", p.tensor.shape()},
                      {"values", std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())}});
  }
  return {{"format", "esvit-checkpoint"}, {"version", ckpt.version}, {"metadata", ckpt.metadata}, {"parameters", params}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "esvit-checkpoint") fail(ErrorKind::kParse, "not an esvit checkpoint");
    if (!doc.contains("version")) fail(ErrorKind::kParse, "checkpoint has no version field");
    Checkpoint ckpt;
    ckpt.version = doc.at("version").get<int>();
    if (ckpt.version != kCheckpointVersion) {
      fail(ErrorKind::kParse, "unsupported checkpoint version " + std::to_string(ckpt.version));
    }
    ckpt.metadata = doc.value("metadata", json::object());
    for (const json& p : doc.at("parameters")) {
      ckpt.parameters.push_back({p.at("path").get<std::string>(),
                                 autograd::Tensor::from_data(p.at("shape").get<autograd::Shape>(),
                                                             p.at("values").get<std::vector<double>>())});
    }
    return ckpt;
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(ckpt).dump() << '\n';
  if (!out) fail(ErrorKind::kIo, "failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::kMissingInput, "checkpoint '" + path.string() + "' not found");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot read checkpoint '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, "checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace esvit
