#include "mvda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts need byte swaps");

namespace mvda {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'M', 'V', 'D', 'A', 'C', 'K', 'P', '1'};

json backbone_to_json(const BackboneConfig& b) {
  json blocks = json::array();
  for (const auto& blk : b.blocks) blocks.push_back({blk.out_channels, blk.stride});
  return json{{"in_channels", b.in_channels},
              {"stem_channels", b.stem_channels},
              {"stem_stride", b.stem_stride},
              {"stem_pool", b.stem_pool},
              {"blocks", blocks}};
}

BackboneConfig backbone_from_json(const json& j) {
  BackboneConfig b;
  b.in_channels = j.at("in_channels").get<int>();
  b.stem_channels = j.at("stem_channels").get<int>();
  b.stem_stride = j.at("stem_stride").get<int>();
  b.stem_pool = j.at("stem_pool").get<bool>();
  b.blocks.clear();
  for (const auto& blk : j.at("blocks"))
    b.blocks.push_back({blk.at(0).get<int>(), blk.at(1).get<int>()});
  return b;
}

json param_table(const ParameterStore<float>& params) {
  json table = json::array();
  for (const auto& p : params.items())
    table.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"frozen", p->frozen}});
  return table;
}

void write_checkpoint_file(const std::string& path, const json& header,
                           const ParameterStore<float>& params) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  const std::string head = header.dump();
  const std::uint64_t head_len = head.size();
  f.write(kMagic, sizeof(kMagic));
  f.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& p : params.items())
    f.write(reinterpret_cast<const char*>(p->value.data()),
            static_cast<std::streamsize>(p->size() * sizeof(float)));
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

json read_header(std::ifstream& f, const std::string& path) {
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
  std::uint64_t head_len = 0;
  f.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  if (!f || head_len == 0 || head_len > (1ull << 30))
    throw std::runtime_error("checkpoint: " + path + " has a corrupt header length");
  std::string head(head_len, '\0');
  f.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!f) throw std::runtime_error("checkpoint: " + path + " truncated inside header");
  json j = json::parse(head, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw std::runtime_error("checkpoint: " + path + " has a malformed header document");
  return j;
}

// Reads the payload into the freshly constructed model, validating the
// parameter table and payload length against the architecture.
void load_payload(std::ifstream& f, const std::string& path, const json& header,
                  ParameterStore<float>& params) {
  const auto& table = header.at("params");
  if (table.size() != params.count())
    throw std::runtime_error("checkpoint: " + path + " lists " + std::to_string(table.size()) +
                             " parameters, architecture has " + std::to_string(params.count()));
  std::uint64_t expected_payload = 0;
  const auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const json& row = table.at(i);
    if (row.at("name").get<std::string>() != items[i]->name)
      throw std::runtime_error("checkpoint: " + path + " parameter table mismatch at '" +
                               items[i]->name + "'");
    const Shape shape = row.at("shape").get<Shape>();
    if (shape != items[i]->value.shape())
      throw std::runtime_error("checkpoint: " + path + " shape mismatch for '" + items[i]->name +
                               "' (" + shape_str(shape) + " vs " +
                               shape_str(items[i]->value.shape()) + ")");
    expected_payload += items[i]->size() * sizeof(float);
  }
  if (header.at("payload_bytes").get<std::uint64_t>() != expected_payload)
    throw std::runtime_error("checkpoint: " + path + " payload length field disagrees with table");

  for (std::size_t i = 0; i < items.size(); ++i) {
    f.read(reinterpret_cast<char*>(items[i]->value.mutable_data()),
           static_cast<std::streamsize>(items[i]->size() * sizeof(float)));
    if (!f)
      throw std::runtime_error("checkpoint: " + path + " truncated in payload of '" +
                               items[i]->name + "'");
    items[i]->frozen = table.at(i).at("frozen").get<bool>();
  }
  // Trailing bytes mean the payload does not match the table.
  f.peek();
  if (!f.eof())
    throw std::runtime_error("checkpoint: " + path + " has trailing bytes after payload");
}

}  // namespace

void save_checkpoint(const ModelL<float>& model, const std::string& path) {
  const ModelLConfig& c = model.config();
  json header{{"kind", "model_l"},
              {"arch",
               {{"input_size", c.input_size},
                {"bins", c.bins},
                {"backbone", backbone_to_json(c.backbone)}}},
              {"params", param_table(model.params())},
              {"payload_bytes", model.params().total_size() * sizeof(float)}};
  write_checkpoint_file(path, header, model.params());
}

void save_checkpoint(const ModelC<float>& model, const std::string& path) {
  const ModelCConfig& c = model.config();
  json header{{"kind", "model_c"},
              {"arch",
               {{"input_size", c.input_size},
                {"num_views", c.num_views},
                {"num_classes", c.num_classes},
                {"head_hidden", c.head_hidden},
                {"fusion", fusion_mode_name(c.fusion)},
                {"shared_backbone", c.shared_backbone},
                {"backbone", backbone_to_json(c.backbone)}}},
              {"params", param_table(model.params())},
              {"payload_bytes", model.params().total_size() * sizeof(float)}};
  write_checkpoint_file(path, header, model.params());
}

ModelL<float> load_model_l_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  const json header = read_header(f, path);
  if (header.at("kind").get<std::string>() != "model_l")
    throw std::runtime_error("checkpoint: " + path + " holds a '" +
                             header.at("kind").get<std::string>() + "', expected model_l");
  const json& arch = header.at("arch");
  ModelLConfig config;
  config.input_size = arch.at("input_size").get<int>();
  config.bins = arch.at("bins").get<std::vector<int>>();
  config.backbone = backbone_from_json(arch.at("backbone"));
  ModelL<float> model = ModelL<float>::create(config, /*seed=*/0);
  load_payload(f, path, header, model.params());
  return model;
}

ModelC<float> load_model_c_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  const json header = read_header(f, path);
  if (header.at("kind").get<std::string>() != "model_c")
    throw std::runtime_error("checkpoint: " + path + " holds a '" +
                             header.at("kind").get<std::string>() + "', expected model_c");
  const json& arch = header.at("arch");
  ModelCConfig config;
  config.input_size = arch.at("input_size").get<int>();
  config.num_views = arch.at("num_views").get<int>();
  config.num_classes = arch.at("num_classes").get<int>();
  config.head_hidden = arch.at("head_hidden").get<int>();
  config.fusion = fusion_mode_from_name(arch.at("fusion").get<std::string>());
  config.shared_backbone = arch.at("shared_backbone").get<bool>();
  config.backbone = backbone_from_json(arch.at("backbone"));
  ModelC<float> model = ModelC<float>::create(config, /*seed=*/0);
  load_payload(f, path, header, model.params());
  return model;
}

std::string checkpoint_kind(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_header(f, path).at("kind").get<std::string>();
}

}  // namespace mvda
