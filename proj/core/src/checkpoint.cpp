#include "dynamo/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "dynamo/error.hpp"

namespace dynamo {

namespace {

using json = nlohmann::json;

constexpr std::array<char, 8> kMagic = {'D', 'Y', 'N', 'A', 'M', 'O', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <class T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw IoError("truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void write_array(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) write_le(out, std::bit_cast<std::uint64_t>(v[i]));
}

Eigen::VectorXd read_array(std::istream& in, std::size_t n) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    v[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(read_le<std::uint64_t>(in));
  }
  return v;
}

}  // namespace

const Eigen::VectorXd* Checkpoint::find_extra(const std::string& name) const {
  for (const auto& [key, value] : extra) {
    if (key == name) return &value;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  ck.weights.validate();
  json header;
  header["format"] = "dynamo-policy";
  header["window"] = {ck.weights.layout.window_x, ck.weights.layout.window_y};
  header["channels"] = ck.weights.layout.channels;
  header["hidden"] = ck.weights.hidden;
  header["hidden_layers"] = 2;
  header["activation"] = "tanh";
  json arrays = json::array();
  arrays.push_back({{"name", "policy"}, {"size", ck.weights.policy.size()}});
  arrays.push_back({{"name", "value"}, {"size", ck.weights.value.size()}});
  for (const auto& [name, v] : ck.extra) arrays.push_back({{"name", name}, {"size", v.size()}});
  header["arrays"] = arrays;
  try {
    header["info"] = json::parse(ck.info);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("checkpoint info is not valid JSON: ") + e.what());
  }
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp);
    out.write(kMagic.data(), kMagic.size());
    write_le(out, kVersion);
    write_le(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_array(out, ck.weights.policy);
    write_array(out, ck.weights.value);
    for (const auto& entry : ck.extra) write_array(out, entry.second);
    if (!out) throw IoError("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw IoError(path + " is not a checkpoint file");
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto length = read_le<std::uint64_t>(in);
  if (length > (1u << 26)) throw IoError("implausible checkpoint header length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw IoError("truncated header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    if (header.at("format") != "dynamo-policy") throw IoError("unknown checkpoint format");
    ck.weights.layout.window_x = header.at("window").at(0).get<int>();
    ck.weights.layout.window_y = header.at("window").at(1).get<int>();
    ck.weights.layout.channels = header.at("channels").get<int>();
    ck.weights.hidden = header.at("hidden").get<int>();
    ck.info = header.at("info").dump();
    for (const auto& a : header.at("arrays")) {
      const auto name = a.at("name").get<std::string>();
      const auto size = a.at("size").get<std::size_t>();
      Eigen::VectorXd v = read_array(in, size);
      if (name == "policy") {
        ck.weights.policy = std::move(v);
      } else if (name == "value") {
        ck.weights.value = std::move(v);
      } else {
        ck.extra.emplace_back(name, std::move(v));
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  }
  try {
    ck.weights.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ck;
}

}  // namespace dynamo
