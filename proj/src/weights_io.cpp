#include "lovme/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lovme/errors.hpp"

namespace lovme {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

bool is_json_path(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw FormatError("cannot open for writing: " + path);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
  void u8(std::uint8_t v) { out.put(static_cast<char>(v)); }
  void f64(double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
      b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
};

struct Reader {
  std::ifstream in;
  std::string path;
  std::size_t offset = 0;
  Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw FormatError("cannot open for reading: " + p);
  }
  void bytes(unsigned char* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
      throw FormatError("truncated weight file " + path + " at byte " +
                        std::to_string(offset));
    offset += n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }
  std::uint8_t u8() {
    unsigned char b;
    bytes(&b, 1);
    return b;
  }
  double f64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
};

const char* activation_name(Activation a) {
  return a == Activation::Relu ? "relu" : "identity";
}

Activation activation_from_tag(std::uint8_t tag, const std::string& where) {
  if (tag == 0) return Activation::Relu;
  if (tag == 1) return Activation::Identity;
  throw FormatError("unknown activation tag " + std::to_string(tag) + " in " +
                    where);
}

}  // namespace

void save_weights(const Network& net, const std::string& path) {
  validate(net);
  if (is_json_path(path)) {
    save_weights_json(net, path);
    return;
  }
  Writer w(path);
  w.out.write(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const DenseLayer& l : net.layers) {
    w.u32(static_cast<std::uint32_t>(l.in_dim));
    w.u32(static_cast<std::uint32_t>(l.out_dim));
    w.u8(static_cast<std::uint8_t>(l.activation));
    for (double v : l.weights) w.f64(v);
    for (double v : l.biases) w.f64(v);
  }
  if (!w.out) throw FormatError("write failed: " + path);
}

Network load_weights(const std::string& path) {
  if (is_json_path(path)) return load_weights_json(path);
  Reader r(path);
  unsigned char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic at byte 0 in " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("unsupported version " + std::to_string(version) +
                      " at byte 4 in " + path);
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0) throw FormatError("zero layer count at byte 8 in " + path);

  Network net;
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    DenseLayer l;
    l.in_dim = r.u32();
    l.out_dim = r.u32();
    const std::size_t tag_offset = r.offset;
    l.activation = activation_from_tag(
        r.u8(), path + " at byte " + std::to_string(tag_offset));
    l.weights.resize(l.in_dim * l.out_dim);
    for (double& v : l.weights) v = r.f64();
    l.biases.resize(l.out_dim);
    for (double& v : l.biases) v = r.f64();
    net.layers.push_back(std::move(l));
  }
  net.input_dim = net.layers.front().in_dim;
  net.class_count = net.layers.back().out_dim;
  validate(net);
  return net;
}

void save_weights_json(const Network& net, const std::string& path) {
  validate(net);
  nlohmann::json j;
  j["magic"] = "TNLW";
  j["version"] = kVersion;
  j["layers"] = nlohmann::json::array();
  for (const DenseLayer& l : net.layers) {
    nlohmann::json jl;
    jl["in_dim"] = l.in_dim;
    jl["out_dim"] = l.out_dim;
    jl["activation"] = activation_name(l.activation);
    jl["weights"] = l.weights;
    jl["biases"] = l.biases;
    j["layers"].push_back(std::move(jl));
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

Network load_weights_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid weight json " + path + ": " + e.what());
  }
  try {
    if (j.at("magic").get<std::string>() != "TNLW")
      throw FormatError("bad magic in " + path);
    if (j.at("version").get<std::uint32_t>() != kVersion)
      throw FormatError("unsupported version in " + path);
    Network net;
    for (const nlohmann::json& jl : j.at("layers")) {
      DenseLayer l;
      l.in_dim = jl.at("in_dim").get<std::size_t>();
      l.out_dim = jl.at("out_dim").get<std::size_t>();
      const std::string act = jl.at("activation").get<std::string>();
      if (act == "relu") {
        l.activation = Activation::Relu;
      } else if (act == "identity") {
        l.activation = Activation::Identity;
      } else {
        throw FormatError("unknown activation '" + act + "' in " + path);
      }
      l.weights = jl.at("weights").get<std::vector<double>>();
      l.biases = jl.at("biases").get<std::vector<double>>();
      net.layers.push_back(std::move(l));
    }
    if (net.layers.empty()) throw FormatError("no layers in " + path);
    net.input_dim = net.layers.front().in_dim;
    net.class_count = net.layers.back().out_dim;
    validate(net);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid weight json " + path + ": " + e.what());
  }
}

}  // namespace lovme
