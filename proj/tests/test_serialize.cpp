#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sesame/rng.hpp"
#include "sesame/serialize.hpp"

using namespace sesame;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "sesame_serialize_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

void write_tensor_file(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  write_tensor(out, t);
}

Tensor read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace

TEST_CASE("tensor round trip is bit exact") {
  Tensor t = Rng(17).normal_tensor({3, 5}, 2.0);
  t[0] = -0.0;
  t[1] = 1e-308;  // subnormal territory survives byte-wise IO
  const fs::path path = temp_file("roundtrip.bin");
  write_tensor_file(path, t);
  Tensor back = read_tensor_file(path);
  CHECK(back.same_shape(t));
  CHECK(back.bit_equal(t));
}

TEST_CASE("tensor file layout is rank, dims, doubles, all little-endian") {
  Tensor t({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  const fs::path path = temp_file("layout.bin");
  write_tensor_file(path, t);
  const auto bytes = read_bytes(path);
  REQUIRE(bytes.size() == 4 + 2 * 4 + 6 * 8);
  CHECK(bytes[0] == 2);  // rank
  CHECK(bytes[1] == 0);
  CHECK(bytes[2] == 0);
  CHECK(bytes[3] == 0);
  CHECK(bytes[4] == 2);  // dim 0
  CHECK(bytes[8] == 3);  // dim 1
  // 1.0 in IEEE-754 little-endian: 00 00 00 00 00 00 f0 3f.
  CHECK(bytes[12 + 6] == 0xf0);
  CHECK(bytes[12 + 7] == 0x3f);
}

TEST_CASE("truncated tensor files are rejected") {
  Tensor t({4, 4});
  const fs::path path = temp_file("truncated.bin");
  write_tensor_file(path, t);
  auto bytes = read_bytes(path);
  bytes.resize(bytes.size() - 5);
  std::ofstream(path, std::ios::binary | std::ios::trunc)
      .write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(read_tensor_file(path), FormatError);

  CHECK_THROWS_AS(read_tensor_file(temp_file("missing.bin")), FormatError);
}

TEST_CASE("checkpoint round trip preserves config, names, order, values") {
  Rng rng(23);
  std::vector<std::pair<std::string, Tensor>> tensors{
      {"embed", rng.normal_tensor({6, 4}, 1.0)},
      {"w", rng.normal_tensor({4, 4}, 0.1)},
      {"b", rng.normal_tensor({4}, 0.1)},
  };
  nlohmann::json config{{"d", 4}, {"heads", 2}};
  const fs::path path = temp_file("checkpoint.bin");
  save_checkpoint(path, tensors, config);

  Checkpoint back = load_checkpoint(path);
  CHECK(back.config == config);
  REQUIRE(back.tensors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.tensors[i].first == tensors[i].first);
    CHECK(back.tensors[i].second.bit_equal(tensors[i].second));
  }
}

TEST_CASE("checkpoint writes are deterministic") {
  std::vector<std::pair<std::string, Tensor>> tensors{
      {"w", Rng(5).normal_tensor({3, 3}, 1.0)}};
  nlohmann::json config{{"seed", 5}};
  const fs::path a = temp_file("det_a.bin");
  const fs::path b = temp_file("det_b.bin");
  save_checkpoint(a, tensors, config);
  save_checkpoint(b, tensors, config);
  CHECK(read_bytes(a) == read_bytes(b));
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::vector<std::pair<std::string, Tensor>> tensors{
      {"w", Tensor::matrix({{1, 2}, {3, 4}})}};
  const fs::path path = temp_file("corrupt.bin");
  save_checkpoint(path, tensors, nlohmann::json::object());

  auto bytes = read_bytes(path);
  SUBCASE("manifest length overruns the file") {
    bytes[0] = 0xff;
    bytes[1] = 0xff;
  }
  SUBCASE("tensor data is cut short") { bytes.resize(bytes.size() - 9); }
  std::ofstream(path, std::ios::binary | std::ios::trunc)
      .write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
}
