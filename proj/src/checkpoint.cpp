#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dualres/trainer.hpp"

namespace dualres {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

constexpr char kMagic[] = "DUALRES-CHECKPOINT-1\n";
constexpr std::size_t kMagicSize = sizeof(kMagic) - 1;

void append_tensor(nlohmann::json& index, std::string& data, const std::string& group, const std::string& name,
                   const Mat& m) {
  index.push_back({{"group", group}, {"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  data.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  nlohmann::json index = nlohmann::json::array();
  std::string data;
  for (const auto& p : c.params.all()) append_tensor(index, data, "param", p.name, p.value);
  append_tensor(index, data, "prior", "M", c.prior);
  for (std::size_t i = 0; i < c.adam.first_moment.size(); ++i) {
    append_tensor(index, data, "adam_m", c.params[i].name, c.adam.first_moment[i]);
    append_tensor(index, data, "adam_v", c.params[i].name, c.adam.second_moment[i]);
  }
  const nlohmann::json header = {{"meta", c.meta}, {"adam_steps", c.adam.steps}, {"tensors", index}};
  const std::string head = header.dump();
  const std::uint64_t head_size = head.size();

  std::string out(kMagic, kMagicSize);
  out.append(reinterpret_cast<const char*>(&head_size), sizeof(head_size));
  out += head;
  out += data;
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicSize + sizeof(std::uint64_t) || bytes.compare(0, kMagicSize, kMagic) != 0) {
    throw DataError("checkpoint: not a checkpoint file");
  }
  std::uint64_t head_size = 0;
  std::memcpy(&head_size, bytes.data() + kMagicSize, sizeof(head_size));
  std::size_t pos = kMagicSize + sizeof(head_size);
  if (head_size > bytes.size() - pos) throw DataError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, head_size));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  pos += head_size;

  Checkpoint c;
  c.meta = header.at("meta");
  c.adam.steps = header.at("adam_steps").get<long long>();
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const std::string name = t.at("name").get<std::string>();
    const std::string group = t.at("group").get<std::string>();
    if (rows < 0 || cols < 0) throw DataError("checkpoint: negative shape for '" + name + "'");
    const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (count * sizeof(double) > bytes.size() - pos) throw DataError("checkpoint: truncated tensor '" + name + "'");
    Mat m(rows, cols);
    std::memcpy(m.data(), bytes.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    if (group == "param") {
      c.params.add(name, std::move(m));
    } else if (group == "prior") {
      c.prior = std::move(m);
    } else if (group == "adam_m") {
      c.adam.first_moment.push_back(std::move(m));
    } else if (group == "adam_v") {
      c.adam.second_moment.push_back(std::move(m));
    } else {
      throw DataError("checkpoint: unknown tensor group '" + group + "'");
    }
  }
  if (pos != bytes.size()) throw DataError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  const std::string bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

Model model_from_checkpoint(const Checkpoint& checkpoint) {
  const ModelConfig config = ModelConfig::from_json(checkpoint.meta.at("model"));
  Model model(config, checkpoint.prior, 0);
  try {
    model.params().assign_from(checkpoint.params);
  } catch (const DataError& e) {
    throw DataError(std::string("checkpoint does not match its model configuration: ") + e.what());
  }
  return model;
}

}  // namespace dualres
