#include <algorithm>
#include <fstream>
#include <system_error>

#include "capsre/training.hpp"

namespace capsre {

namespace {

constexpr const char* kFormat = "capsre-checkpoint";

nlohmann::ordered_json tensor_json(const Tensor& t) {
  nlohmann::ordered_json j;
  std::vector<std::size_t> dims;
  for (std::size_t a = 0; a < t.rank(); ++a) dims.push_back(t.dim(a));
  j["shape"] = dims;
  j["data"] = t.storage();
  return j;
}

Tensor tensor_from(const nlohmann::json& j, const std::string& what) {
  const auto dims = j.at("shape").get<std::vector<std::size_t>>();
  auto data = j.at("data").get<std::vector<double>>();
  if (dims.size() > 3) throw CheckedFailure(what + ": rank " + std::to_string(dims.size()));
  const Shape shape(dims);
  if (shape.size() != data.size()) {
    throw CheckedFailure(what + ": shape " + shape.str() + " holds " +
                         std::to_string(shape.size()) + " values, file has " +
                         std::to_string(data.size()));
  }
  return Tensor(shape, std::move(data));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Trainer& trainer) {
  const Model& model = trainer.model();
  const ParameterSet& params = model.params();
  const Adam& adam = trainer.optimizer();

  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["epochs_done"] = trainer.epochs_done();
  j["rng_state"] = trainer.rng_state();
  j["config"] = to_json(model.config());
  auto& opt = j["adam"];
  opt["steps"] = adam.steps();
  opt["m"] = nlohmann::ordered_json::array();
  opt["v"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt["m"].push_back(tensor_json(adam.first_moments()[i]));
    opt["v"].push_back(tensor_json(adam.second_moments()[i]));
  }
  auto& list = j["parameters"];
  list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto entry = tensor_json(*params[i].value);
    entry["name"] = params[i].name;
    list.push_back(std::move(entry));
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckedFailure("cannot write checkpoint " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw CheckedFailure("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckedFailure("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckedFailure("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CheckedFailure(path.string() + ": not a checkpoint (" + e.what() + ")");
  }
  if (j.value("format", "") != kFormat) {
    throw CheckedFailure(path.string() + ": not a checkpoint");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw CheckedFailure(path.string() + ": unsupported checkpoint version " +
                         j.at("version").dump());
  }
  Checkpoint ck;
  try {
    ck.config = train_config_from_json(j.at("config"));
    ck.epochs_done = j.at("epochs_done").get<std::size_t>();
    ck.rng_state = j.at("rng_state").get<std::uint64_t>();
    const auto& opt = j.at("adam");
    ck.adam_steps = opt.at("steps").get<std::uint64_t>();
    for (const auto& p : j.at("parameters")) {
      ck.names.push_back(p.at("name").get<std::string>());
      ck.params.push_back(tensor_from(p, ck.names.back()));
    }
    for (const auto& t : opt.at("m")) ck.adam_m.push_back(tensor_from(t, "adam.m"));
    for (const auto& t : opt.at("v")) ck.adam_v.push_back(tensor_from(t, "adam.v"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckedFailure(path.string() + ": malformed checkpoint (" + e.what() + ")");
  }
  if (ck.adam_m.size() != ck.params.size() || ck.adam_v.size() != ck.params.size()) {
    throw CheckedFailure(path.string() + ": optimizer state does not match parameters");
  }
  return ck;
}

ParameterSet checkpoint_parameters(const Checkpoint& checkpoint,
                                   const ParameterSet& expected) {
  ParameterSet out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const Parameter& want = expected[i];
    const auto it = std::find(checkpoint.names.begin(), checkpoint.names.end(), want.name);
    if (it == checkpoint.names.end()) {
      throw CheckedFailure("checkpoint lacks parameter " + want.name + " " +
                           want.value->shape().str());
    }
    const Tensor& have = checkpoint.params[static_cast<std::size_t>(it - checkpoint.names.begin())];
    if (have.shape() != want.value->shape()) {
      throw CheckedFailure("parameter " + want.name + ": checkpoint shape " +
                           have.shape().str() + " vs config shape " +
                           want.value->shape().str());
    }
    out.add(want.name, have);
  }
  if (checkpoint.names.size() != expected.size()) {
    throw CheckedFailure("checkpoint holds " + std::to_string(checkpoint.names.size()) +
                         " parameters, config implies " + std::to_string(expected.size()));
  }
  return out;
}

}  // namespace capsre
