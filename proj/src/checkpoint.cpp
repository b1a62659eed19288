#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tempora/errors.hpp"
#include "tempora/serialization.hpp"
#include "tempora/trainer.hpp"

namespace tempora {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct BlockShape {
  std::string_view name;
  Eigen::Index rows;
  Eigen::Index cols;
  bool is_vector;
};

std::vector<BlockShape> block_shapes(const RnnRsmParams& p) {
  const Eigen::Index K = p.vocab_size(), F = p.hidden_size(), U = p.state_size();
  return {{"word_topic_weights", K, F, false}, {"visible_bias", K, 1, true},  {"hidden_bias", F, 1, true},
          {"visible_from_state", K, U, false}, {"hidden_from_state", F, U, false}, {"state_input", U, K, false},
          {"state_recurrence", U, U, false},   {"state_bias", U, 1, true},    {"initial_state", U, 1, true}};
}

// Blocks are stored column-major in memory (Eigen default); files are row-major.
json block_to_json(const ConstParamBlock& block, const BlockShape& shape) {
  if (shape.is_vector) return json(std::vector<double>(block.data, block.data + block.size));
  json rows = json::array();
  for (Eigen::Index r = 0; r < shape.rows; ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < shape.cols; ++c) row.push_back(block.data[c * shape.rows + r]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void block_from_json(const json& j, const ParamBlock& block, const BlockShape& shape) {
  auto fail = [&] { throw InputError("checkpoint: block '" + std::string(shape.name) + "' has the wrong shape"); };
  if (shape.is_vector) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != shape.rows) fail();
    for (Eigen::Index i = 0; i < shape.rows; ++i) block.data[i] = j[static_cast<std::size_t>(i)].get<double>();
    return;
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != shape.rows) fail();
  for (Eigen::Index r = 0; r < shape.rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != shape.cols) fail();
    for (Eigen::Index c = 0; c < shape.cols; ++c) block.data[c * shape.rows + r] = row[static_cast<std::size_t>(c)].get<double>();
  }
}

json dims_json(const RnnRsmParams& p) {
  return {{"vocab", p.vocab_size()}, {"hidden", p.hidden_size()}, {"recurrent", p.state_size()}};
}

RnnRsmParams shell_from_dims(const json& j) {
  const auto& d = j.at("dims");
  RnnRsmParams p = RnnRsmParams::zeros(d.at("vocab").get<Eigen::Index>(), d.at("hidden").get<Eigen::Index>(),
                                       d.at("recurrent").get<Eigen::Index>());
  p.activation = parse_recurrent_activation(j.value("activation", std::string("tanh")));
  p.scale_visible_sum = j.value("scale_visible_sum", false);
  return p;
}

// --- binary sidecar --------------------------------------------------------

constexpr char kSidecarMagic[8] = {'T', 'M', 'P', 'R', 'B', 'I', 'N', '1'};

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw InputError("checkpoint sidecar: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void write_sidecar(const RnnRsmParams& p, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  out.write(kSidecarMagic, sizeof kSidecarMagic);
  const auto shapes = block_shapes(p);
  const auto blocks = parameter_blocks(p);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shapes[b].name.size()));
    out.write(shapes[b].name.data(), static_cast<std::streamsize>(shapes[b].name.size()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(shapes[b].rows));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(shapes[b].cols));
    for (Eigen::Index r = 0; r < shapes[b].rows; ++r) {
      for (Eigen::Index c = 0; c < shapes[b].cols; ++c) put_le<double>(out, blocks[b].data[c * shapes[b].rows + r]);
    }
  }
}

void read_sidecar(RnnRsmParams& p, const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint sidecar " + file.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSidecarMagic, sizeof magic) != 0) {
    throw InputError("checkpoint sidecar " + file.string() + ": bad magic");
  }
  const auto shapes = block_shapes(p);
  const auto blocks = parameter_blocks(p);
  if (get_le<std::uint32_t>(in) != blocks.size()) throw InputError("checkpoint sidecar: unexpected block count");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::string name(get_le<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = get_le<std::uint64_t>(in);
    const auto cols = get_le<std::uint64_t>(in);
    if (name != shapes[b].name || rows != static_cast<std::uint64_t>(shapes[b].rows) ||
        cols != static_cast<std::uint64_t>(shapes[b].cols)) {
      throw InputError("checkpoint sidecar: block '" + name + "' does not match the declared dimensions");
    }
    for (Eigen::Index r = 0; r < shapes[b].rows; ++r) {
      for (Eigen::Index c = 0; c < shapes[b].cols; ++c) blocks[b].data[c * shapes[b].rows + r] = get_le<double>(in);
    }
  }
}

}  // namespace

json config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"cd_k", c.cd_k},
          {"learning_rate", c.learning_rate},
          {"hidden", c.hidden},
          {"recurrent", c.recurrent},
          {"seed", c.seed},
          {"early_stop_patience", c.early_stop_patience},
          {"eval_every", c.eval_every},
          {"warm_start_epochs", c.warm_start_epochs},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},
          {"minibatch", c.minibatch},
          {"cd_mean_field_final", c.cd_mean_field_final},
          {"recurrent_activation", std::string(to_string(c.activation))},
          {"scale_visible_sum", c.scale_visible_sum},
          {"z_mode", to_string(c.z_mode)},
          {"ais_temperatures", c.ais_temperatures},
          {"ais_runs", c.ais_runs}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.cd_k = j.at("cd_k").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.hidden = j.at("hidden").get<int>();
  c.recurrent = j.at("recurrent").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.eval_every = j.at("eval_every").get<int>();
  c.warm_start_epochs = j.value("warm_start_epochs", 0);
  c.momentum = j.value("momentum", 0.0);
  c.weight_decay = j.value("weight_decay", 0.0);
  c.clip_norm = j.value("clip_norm", 100.0);
  c.minibatch = j.value("minibatch", std::size_t{0});
  c.cd_mean_field_final = j.value("cd_mean_field_final", true);
  c.activation = parse_recurrent_activation(j.value("recurrent_activation", std::string("tanh")));
  c.scale_visible_sum = j.value("scale_visible_sum", false);
  c.z_mode = parse_z_mode(j.value("z_mode", std::string("auto")));
  c.ais_temperatures = j.value("ais_temperatures", 1000);
  c.ais_runs = j.value("ais_runs", 100);
  return c;
}

json params_to_json(const RnnRsmParams& p) {
  json out = {{"dims", dims_json(p)},
              {"activation", std::string(to_string(p.activation))},
              {"scale_visible_sum", p.scale_visible_sum}};
  const auto shapes = block_shapes(p);
  const auto blocks = parameter_blocks(p);
  json block_json = json::object();
  for (std::size_t b = 0; b < blocks.size(); ++b) block_json[std::string(shapes[b].name)] = block_to_json(blocks[b], shapes[b]);
  out["blocks"] = std::move(block_json);
  return out;
}

RnnRsmParams params_from_json(const json& j) {
  RnnRsmParams p = shell_from_dims(j);
  const auto shapes = block_shapes(p);
  const auto blocks = parameter_blocks(p);
  const json& block_json = j.at("blocks");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string name(shapes[b].name);
    if (!block_json.contains(name)) throw InputError("checkpoint: missing parameter block '" + name + "'");
    block_from_json(block_json.at(name), blocks[b], shapes[b]);
  }
  return p;
}

namespace {

json checkpoint_envelope(const Checkpoint& c) {
  json j = {{"format_version", kCheckpointFormatVersion},
            {"epoch", c.epoch},
            {"vocab_hash", c.vocab_hash},
            {"config", config_to_json(c.config)},
            {"rng", {{"scheme", c.rng.scheme}, {"seed", c.rng.seed}, {"next_epoch", c.rng.next_epoch}}}};
  if (c.heldout_sum_ppl) j["heldout_sum_ppl"] = *c.heldout_sum_ppl;
  if (c.velocity) j["velocity"] = params_to_json(*c.velocity);
  return j;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
  json j = checkpoint_envelope(c);
  j["params"] = params_to_json(c.params);
  return j.dump(1);
}

void save_checkpoint(const Checkpoint& c, const fs::path& path, bool binary_sidecar) {
  json j = checkpoint_envelope(c);
  if (binary_sidecar) {
    fs::path sidecar = path;
    sidecar += ".bin";
    write_sidecar(c.params, sidecar);
    j["params"] = {{"dims", dims_json(c.params)},
                   {"activation", std::string(to_string(c.params.activation))},
                   {"scale_visible_sum", c.params.scale_visible_sum},
                   {"sidecar", sidecar.filename().string()}};
  } else {
    j["params"] = params_to_json(c.params);
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw InputError("checkpoint " + path.string() + ": unsupported format_version " + std::to_string(version));
    }
    Checkpoint c;
    c.epoch = j.at("epoch").get<int>();
    c.vocab_hash = j.at("vocab_hash").get<std::string>();
    c.config = config_from_json(j.at("config"));
    const json& rng = j.at("rng");
    c.rng.scheme = rng.at("scheme").get<std::string>();
    c.rng.seed = rng.at("seed").get<std::uint64_t>();
    c.rng.next_epoch = rng.at("next_epoch").get<int>();
    if (j.contains("heldout_sum_ppl")) c.heldout_sum_ppl = j["heldout_sum_ppl"].get<double>();
    const json& params = j.at("params");
    if (params.contains("sidecar")) {
      c.params = shell_from_dims(params);
      read_sidecar(c.params, path.parent_path() / params["sidecar"].get<std::string>());
    } else {
      c.params = params_from_json(params);
    }
    if (j.contains("velocity")) c.velocity = params_from_json(j["velocity"]);
    return c;
  } catch (const json::exception& e) {
    throw InputError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace tempora
