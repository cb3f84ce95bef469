#include "medsr/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include "json.hpp"
#include <stdexcept>

#include "le_bytes.hpp"

namespace medsr {
namespace {

constexpr char kMagic[] = "MEDSRCKP";

nlohmann::json config_to_json(const SRNetConfig& c) {
  return {{"scale_factor", c.scale_factor},
          {"axis_mode", to_string(c.axis_mode)},
          {"shuffle_axis", to_string(c.shuffle_axis)},
          {"base_filters", c.base_filters},
          {"enable_second_block", c.enable_second_block},
          {"enable_intermediate_loss", c.enable_intermediate_loss},
          {"enable_short_skips", c.enable_short_skips},
          {"enable_long_skip", c.enable_long_skip},
          {"relu_before_shuffle", c.relu_before_shuffle},
          {"relu_on_output", c.relu_on_output},
          {"lambda", c.lambda}};
}

SRNetConfig config_from_json(const nlohmann::json& j) {
  SRNetConfig c;
  c.scale_factor = j.at("scale_factor").get<std::size_t>();
  c.axis_mode = parse_axis_mode(j.at("axis_mode").get<std::string>());
  c.shuffle_axis = parse_shuffle_axis(j.at("shuffle_axis").get<std::string>());
  c.base_filters = j.at("base_filters").get<std::size_t>();
  c.enable_second_block = j.at("enable_second_block").get<bool>();
  c.enable_intermediate_loss = j.at("enable_intermediate_loss").get<bool>();
  c.enable_short_skips = j.at("enable_short_skips").get<bool>();
  c.enable_long_skip = j.at("enable_long_skip").get<bool>();
  c.relu_before_shuffle = j.at("relu_before_shuffle").get<bool>();
  c.relu_on_output = j.at("relu_on_output").get<bool>();
  c.lambda = j.at("lambda").get<double>();
  return c;
}

void put_array(std::vector<std::uint8_t>& out, const std::string& name, const Tensor& t) {
  detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
  detail::put_bytes(out, name);
  detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) detail::put_f32(out, v);
}

Tensor read_array(detail::ByteReader& in, const std::string& expected_name) {
  const auto name = in.str(in.u32());
  if (name != expected_name) in.fail("expected array '" + expected_name + "', found '" + name + "'");
  const auto rank = in.u32();
  if (rank == 0 || rank > 8) in.fail("bad rank for '" + name + "'");
  Shape shape(rank);
  for (auto& d : shape) d = in.u32();
  std::vector<float> data(element_count(shape));
  for (auto& v : data) v = in.f32();
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const SRNet& net) {
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, std::string(kMagic, 8));
  detail::put_u32(out, kCheckpointFormatVersion);
  const auto header = config_to_json(net.config()).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  detail::put_bytes(out, header);
  const auto& layers = net.layers();
  detail::put_u32(out, static_cast<std::uint32_t>(layers.size() * 2));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto prefix = "conv" + std::to_string(i + 1);
    put_array(out, prefix + ".weight", layers[i].weights);
    put_array(out, prefix + ".bias", layers[i].bias);
  }
  return out;
}

SRNet deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  detail::ByteReader in(bytes, origin);
  if (in.str(8) != std::string(kMagic, 8)) in.fail("not a checkpoint (bad magic)");
  const auto version = in.u32();
  if (version != kCheckpointFormatVersion) in.fail("unsupported checkpoint version " + std::to_string(version));
  SRNetConfig config;
  try {
    config = config_from_json(nlohmann::json::parse(in.str(in.u32())));
  } catch (const nlohmann::json::exception& e) {
    in.fail(std::string("malformed config header: ") + e.what());
  }
  const auto count = in.u32();
  if (count % 2 != 0) in.fail("odd array count");
  std::vector<ConvLayer<float>> layers(count / 2);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto prefix = "conv" + std::to_string(i + 1);
    layers[i].weights = read_array(in, prefix + ".weight");
    layers[i].bias = read_array(in, prefix + ".bias");
  }
  if (!in.at_end()) in.fail("trailing bytes");
  try {
    return SRNet(config, std::move(layers));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(origin + ": " + e.what());
  }
}

void save_checkpoint(const SRNet& net, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(net);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path.string());
}

SRNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path.string());
}

}  // namespace medsr
