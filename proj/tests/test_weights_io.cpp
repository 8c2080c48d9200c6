#include <doctest.h>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lovme/errors.hpp"
#include "lovme/weights_io.hpp"
#include "test_helpers.hpp"

using namespace lovme;

namespace {

bool nets_bit_equal(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size()) return false;
  if (a.input_dim != b.input_dim || a.class_count != b.class_count)
    return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    const DenseLayer& x = a.layers[k];
    const DenseLayer& y = b.layers[k];
    if (x.in_dim != y.in_dim || x.out_dim != y.out_dim) return false;
    if (x.activation != y.activation) return false;
    if (x.weights.size() != y.weights.size()) return false;
    if (x.biases.size() != y.biases.size()) return false;
    if (std::memcmp(x.weights.data(), y.weights.data(),
                    x.weights.size() * sizeof(double)) != 0)
      return false;
    if (std::memcmp(x.biases.data(), y.biases.data(),
                    x.biases.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("binary weights round-trip bit-exactly, awkward values included") {
  test::TempDir dir;
  Network net = test::tiny_net(5, 3);
  net.layers[0].weights[0] = -0.0;
  net.layers[0].weights[1] = 4.9406564584124654e-324;  // smallest denormal
  net.layers[0].weights[2] = 0.1;
  net.layers[1].biases[0] = -1e308;

  const std::string path = dir.file("net.tnlw");
  save_weights(net, path);
  const Network back = load_weights(path);
  CHECK(nets_bit_equal(net, back));
}

TEST_CASE("binary layout is little-endian with a fixed header") {
  test::TempDir dir;
  const std::string path = dir.file("hand.tnlw");
  save_weights(test::hand_net(), path);
  const std::string bytes = slurp(path);

  // header 12 + 2x (layer header 9) + 12 doubles
  REQUIRE(bytes.size() == 12 + 2 * 9 + 12 * 8);
  CHECK(bytes.compare(0, 4, "TNLW") == 0);
  CHECK(std::uint8_t(bytes[4]) == 1);   // version LE
  CHECK(std::uint8_t(bytes[8]) == 2);   // layer count LE
  CHECK(std::uint8_t(bytes[12]) == 2);  // layer 0 in_dim
  CHECK(std::uint8_t(bytes[20]) == 0);  // relu tag
  // first weight is 1.0 = 0x3FF0000000000000 little-endian
  const unsigned char one[8] = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
  CHECK(std::memcmp(bytes.data() + 21, one, 8) == 0);
}

TEST_CASE("json mirror round-trips and is selected by extension") {
  test::TempDir dir;
  Network net = test::tiny_net(4, 9);
  net.layers[0].weights[0] = -0.0;
  net.layers[0].weights[1] = 1.0 / 3.0;

  const std::string path = dir.file("net.json");
  save_weights(net, path);  // extension dispatch
  const std::string text = slurp(path);
  CHECK(text.find("\"magic\": \"TNLW\"") != std::string::npos);
  CHECK(text.find("\"activation\": \"relu\"") != std::string::npos);

  const Network back = load_weights(path);
  CHECK(nets_bit_equal(net, back));
  CHECK(nets_bit_equal(load_weights_json(path), back));
}

TEST_CASE("binary and json mirrors describe the same network") {
  test::TempDir dir;
  const Network net = test::tiny_net(6, 4);
  save_weights(net, dir.file("a.tnlw"));
  save_weights_json(net, dir.file("a.json"));
  CHECK(nets_bit_equal(load_weights(dir.file("a.tnlw")),
                       load_weights(dir.file("a.json"))));
}

TEST_CASE("malformed binary weight files are rejected") {
  test::TempDir dir;
  const std::string good_path = dir.file("good.tnlw");
  save_weights(test::hand_net(), good_path);
  const std::string good = slurp(good_path);

  CHECK_THROWS_AS(load_weights(dir.file("absent.tnlw")), FormatError);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  spit(dir.file("bad_magic.tnlw"), bad_magic);
  CHECK_THROWS_AS(load_weights(dir.file("bad_magic.tnlw")), FormatError);

  std::string bad_version = good;
  bad_version[4] = 9;
  spit(dir.file("bad_version.tnlw"), bad_version);
  CHECK_THROWS_AS(load_weights(dir.file("bad_version.tnlw")), FormatError);

  std::string bad_tag = good;
  bad_tag[20] = 7;
  spit(dir.file("bad_tag.tnlw"), bad_tag);
  CHECK_THROWS_AS(load_weights(dir.file("bad_tag.tnlw")), FormatError);

  spit(dir.file("short.tnlw"), good.substr(0, good.size() - 5));
  CHECK_THROWS_AS(load_weights(dir.file("short.tnlw")), FormatError);

  // inconsistent dims between layers fail network validation, not parsing
  std::string bad_dim = good;
  bad_dim[12] = 3;  // layer 0 in_dim; also desyncs the byte stream
  spit(dir.file("bad_dim.tnlw"), bad_dim);
  CHECK_THROWS((void)load_weights(dir.file("bad_dim.tnlw")));
}

TEST_CASE("malformed json weight files are rejected") {
  test::TempDir dir;
  const std::string path = dir.file("w.json");

  spit(path, "{ not json");
  CHECK_THROWS_AS(load_weights(path), FormatError);

  spit(path, R"({"magic":"NOPE","version":1,"layers":[]})");
  CHECK_THROWS_AS(load_weights(path), FormatError);

  spit(path, R"({"magic":"TNLW","version":2,"layers":[]})");
  CHECK_THROWS_AS(load_weights(path), FormatError);

  spit(path, R"({"magic":"TNLW","version":1,"layers":[]})");
  CHECK_THROWS_AS(load_weights(path), FormatError);

  spit(path,
       R"({"magic":"TNLW","version":1,"layers":[
            {"in_dim":1,"out_dim":2,"activation":"tanh",
             "weights":[1.0,2.0],"biases":[0.0,0.0]}]})");
  CHECK_THROWS_AS(load_weights(path), FormatError);

  // missing field
  spit(path,
       R"({"magic":"TNLW","version":1,"layers":[
            {"in_dim":1,"out_dim":2,"weights":[1.0,2.0],
             "biases":[0.0,0.0]}]})");
  CHECK_THROWS_AS(load_weights(path), FormatError);

  // weight count disagrees with dims: caught by validate -> ShapeError
  spit(path,
       R"({"magic":"TNLW","version":1,"layers":[
            {"in_dim":1,"out_dim":2,"activation":"identity",
             "weights":[1.0],"biases":[0.0,0.0]}]})");
  CHECK_THROWS_AS(load_weights(path), ShapeError);
}

TEST_CASE("saving an invalid network is refused") {
  test::TempDir dir;
  Network broken = test::hand_net();
  broken.layers[1].in_dim = 5;
  CHECK_THROWS_AS(save_weights(broken, dir.file("broken.tnlw")), ShapeError);
}
