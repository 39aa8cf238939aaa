#include "pyroclass/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "pyroclass/error.hpp"
#include "pyroclass/fsutil.hpp"

namespace pyroclass {

namespace {

using json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U take(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(U)) throw CheckpointError("checkpoint truncated");
  U value;
  std::memcpy(&value, bytes.data() + pos, sizeof(U));
  pos += sizeof(U);
  return value;
}

json config_json(const ModelConfig& c) {
  json j;
  j["depth"] = c.depth;
  j["task"] = std::string(to_string(c.task));
  j["num_classes"] = c.num_classes;
  j["dropout_rate"] = c.dropout_rate;
  j["input_size"] = c.input_size;
  j["base_width"] = c.base_width;
  j["dense_width"] = c.dense_width;
  return j;
}

ModelConfig config_of(const json& j) {
  ModelConfig c;
  c.depth = j.at("depth").get<int>();
  c.task = parse_task(j.at("task").get<std::string>());
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.input_size = j.at("input_size").get<std::size_t>();
  c.base_width = j.at("base_width").get<std::size_t>();
  c.dense_width = j.at("dense_width").get<std::size_t>();
  return c;
}

// Reads magic, version and header; leaves `pos` at the payload.
json read_header(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  pos = sizeof(kCheckpointMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto len = take<std::uint64_t>(bytes, pos);
  if (bytes.size() - pos < len) throw CheckpointError("checkpoint truncated in header");
  json header;
  try {
    header = json::parse(bytes.substr(pos, len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += len;
  return header;
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_of(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
}

std::string serialize_checkpoint(const Model& model) {
  json header;
  header["config"] = config_json(model.config);
  header["step"] = model.step;
  header["seed"] = model.seed;
  header["param_count"] = param_count(model);
  header["shapes"] = json::array();
  for_each_param(model, std::function<void(const Tensor&)>(
                            [&](const Tensor& t) { header["shapes"].push_back(t.shape()); }));
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + param_count(model) * sizeof(float));
  for_each_param(model, std::function<void(const Tensor&)>([&](const Tensor& t) {
                   out.append(reinterpret_cast<const char*>(t.raw()), t.size() * sizeof(float));
                 }));
  return out;
}

std::string checkpoint_header(std::string_view bytes) {
  std::size_t pos = 0;
  return read_header(bytes, pos).dump(2);
}

Model deserialize_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  const json header = read_header(bytes, pos);

  Model model;
  std::vector<Shape> shapes;
  try {
    const ModelConfig config = config_of(header.at("config"));
    model = zero_model<float>(config);
    model.step = header.at("step").get<std::uint64_t>();
    model.seed = header.at("seed").get<std::uint64_t>();
    shapes = header.at("shapes").get<std::vector<Shape>>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header incomplete: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint header has an invalid config: ") + e.what());
  }

  std::size_t index = 0;
  for_each_param(model, std::function<void(Tensor&)>([&](Tensor& t) {
                   if (index >= shapes.size() || shapes[index] != t.shape()) {
                     throw CheckpointError("checkpoint tensor " + std::to_string(index) +
                                           " has a shape inconsistent with its config");
                   }
                   ++index;
                 }));
  if (index != shapes.size()) throw CheckpointError("checkpoint lists more tensors than its config has");

  const std::size_t need = param_count(model) * sizeof(float);
  if (bytes.size() - pos < need) throw CheckpointError("checkpoint truncated in parameter payload");
  if (bytes.size() - pos > need) throw CheckpointError("checkpoint has trailing bytes");
  for_each_param(model, std::function<void(Tensor&)>([&](Tensor& t) {
                   std::memcpy(t.raw(), bytes.data() + pos, t.size() * sizeof(float));
                   pos += t.size() * sizeof(float);
                 }));
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file_text(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return deserialize_checkpoint(bytes);
}

}  // namespace pyroclass
