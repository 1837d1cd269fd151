#include "sesame/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "sesame/errors.hpp"

namespace sesame {

namespace {

constexpr std::size_t kMaxRank = 8;
constexpr std::size_t kMaxElements = std::size_t{1} << 30;

void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw FormatError(std::string("truncated stream reading ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[i]} << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

double read_f64(std::istream& in, const char* what) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw FormatError(std::string("truncated stream reading ") + what);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t i = 0; i < t.rank(); ++i) {
    write_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  }
  for (std::size_t i = 0; i < t.size(); ++i) write_f64(out, t[i]);
}

Tensor read_tensor(std::istream& in) {
  const std::uint32_t rank = read_u32(in, "tensor rank");
  if (rank == 0 || rank > kMaxRank) {
    throw FormatError("invalid tensor rank " + std::to_string(rank));
  }
  std::vector<std::size_t> shape(rank);
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t dim = read_u32(in, "tensor dimension");
    if (dim == 0) throw FormatError("zero tensor dimension");
    shape[i] = dim;
    if (total > kMaxElements / dim) {
      throw FormatError("tensor element count exceeds limit");
    }
    total *= dim;
  }
  std::vector<double> data(total);
  for (std::size_t i = 0; i < total; ++i) data[i] = read_f64(in, "tensor data");
  return Tensor(std::move(shape), std::move(data));
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors,
                     const nlohmann::json& config) {
  nlohmann::json manifest;
  manifest["config"] = config;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    list.push_back(std::move(entry));
  }
  manifest["tensors"] = std::move(list);
  const std::string text = manifest.dump();
  if (text.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError("checkpoint manifest too large");
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) write_tensor(out, t);
  out.flush();
  if (!out) throw FormatError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  const std::uint32_t len = read_u32(in, "manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("truncated checkpoint manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what());
  }
  if (!manifest.contains("config") || !manifest.contains("tensors") ||
      !manifest["tensors"].is_array()) {
    throw FormatError("checkpoint manifest missing config or tensors");
  }

  Checkpoint ckpt;
  ckpt.config = manifest["config"];
  for (const auto& entry : manifest["tensors"]) {
    if (!entry.contains("name") || !entry.contains("shape")) {
      throw FormatError("checkpoint manifest entry missing name or shape");
    }
    const std::string name = entry["name"].get<std::string>();
    Tensor t = read_tensor(in);
    const std::vector<std::size_t> expected =
        entry["shape"].get<std::vector<std::size_t>>();
    if (t.shape() != expected) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        t.shape_str() + " but manifest lists " +
                        Tensor::shape_str(expected));
    }
    ckpt.tensors.emplace_back(name, std::move(t));
  }
  return ckpt;
}

}  // namespace sesame
