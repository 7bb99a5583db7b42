#include "shrinklab/checkpoint.h"

#include <bit>
#include <cstring>

#include "json.hpp"
#include "shrinklab/text_io.h"

namespace shrinklab {
namespace {

constexpr const char* kFormat = "shrinklab-checkpoint";
constexpr int kVersion = 1;

int64_t element_count(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t s : shape) n *= s;
  return n;
}

uint64_t to_little_endian(uint64_t bits) {
  if constexpr (std::endian::native == std::endian::little) {
    return bits;
  } else {
    return __builtin_bswap64(bits);
  }
}

}  // namespace

void Checkpoint::add(std::string name, std::vector<int64_t> shape,
                     std::span<const double> data) {
  require(!contains(name), "duplicate tensor name " + name);
  require(element_count(shape) == static_cast<int64_t>(data.size()),
          "tensor " + name + " shape does not match its data");
  tensors_.push_back(
      {std::move(name), std::move(shape), {data.begin(), data.end()}});
}

void Checkpoint::add(std::span<const TensorRef> refs) {
  for (const TensorRef& r : refs) {
    add(r.name, r.shape, {r.value.data(), r.value.size()});
  }
}

void Checkpoint::add_matrix(std::string name, const Matrix& m) {
  add(std::move(name), {m.rows(), m.cols()},
      {m.data(), static_cast<size_t>(m.size())});
}

void Checkpoint::add_vector(std::string name, const Vector& v) {
  add(std::move(name), {v.size()}, {v.data(), static_cast<size_t>(v.size())});
}

bool Checkpoint::contains(std::string_view name) const {
  for (const Tensor& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const Checkpoint::Tensor& Checkpoint::get(std::string_view name) const {
  for (const Tensor& t : tensors_) {
    if (t.name == name) return t;
  }
  throw FormatError("checkpoint has no tensor '" + std::string(name) + "'");
}

Matrix Checkpoint::get_matrix(std::string_view name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 2) {
    throw FormatError("tensor '" + t.name + "' is not 2-D");
  }
  Matrix m(t.shape[0], t.shape[1]);
  std::copy(t.data.begin(), t.data.end(), m.data());
  return m;
}

Vector Checkpoint::get_vector(std::string_view name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 1) {
    throw FormatError("tensor '" + t.name + "' is not 1-D");
  }
  return Eigen::Map<const Vector>(t.data.data(), t.shape[0]);
}

void Checkpoint::load_into(std::span<const TensorRef> refs) const {
  for (const TensorRef& r : refs) {
    const Tensor& t = get(r.name);
    if (t.shape != r.shape) {
      throw FormatError("tensor '" + r.name + "' has an unexpected shape");
    }
    std::copy(t.data.begin(), t.data.end(), r.value.begin());
  }
}

std::string Checkpoint::serialize() const {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["tensors"] = nlohmann::json::array();
  size_t total = 0;
  for (const Tensor& t : tensors_) {
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
    total += t.data.size();
  }
  std::string out = header.dump();
  out.push_back('\n');
  const size_t offset = out.size();
  out.resize(offset + total * sizeof(double));
  char* cursor = out.data() + offset;
  for (const Tensor& t : tensors_) {
    for (double x : t.data) {
      uint64_t bits = to_little_endian(std::bit_cast<uint64_t>(x));
      std::memcpy(cursor, &bits, sizeof(bits));
      cursor += sizeof(bits);
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(std::string_view bytes) {
  const size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) {
    throw FormatError("checkpoint header is not newline-terminated");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != kFormat ||
      header.value("version", 0) != kVersion) {
    throw FormatError("not a shrinklab checkpoint (format/version)");
  }
  Checkpoint ckpt;
  size_t offset = newline + 1;
  for (const auto& entry : header.at("tensors")) {
    Tensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<int64_t>>();
    const int64_t n = element_count(t.shape);
    if (n < 0 || offset + n * sizeof(double) > bytes.size()) {
      throw FormatError("checkpoint truncated in tensor '" + t.name + "'");
    }
    t.data.resize(n);
    for (int64_t i = 0; i < n; ++i) {
      uint64_t bits;
      std::memcpy(&bits, bytes.data() + offset, sizeof(bits));
      t.data[i] = std::bit_cast<double>(to_little_endian(bits));
      offset += sizeof(bits);
    }
    ckpt.tensors_.push_back(std::move(t));
  }
  if (offset != bytes.size()) {
    throw FormatError("checkpoint has trailing bytes");
  }
  return ckpt;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

Mlp mlp_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& first = ckpt.get(prefix + ".0.weight");
  const auto& last = ckpt.get(prefix + ".2.weight");
  if (first.shape.size() != 2 || last.shape.size() != 2) {
    throw FormatError("malformed " + prefix + " weights");
  }
  Mlp mlp(static_cast<int>(first.shape[1]), static_cast<int>(first.shape[0]),
          static_cast<int>(last.shape[0]), 0);
  std::vector<TensorRef> refs;
  mlp.append_params(prefix, refs);
  ckpt.load_into(refs);
  return mlp;
}

MlpParams params_from_checkpoint(const Checkpoint& ckpt) {
  return {mlp_from_checkpoint(ckpt, "encoder"),
          mlp_from_checkpoint(ckpt, "decoder")};
}

}  // namespace shrinklab
