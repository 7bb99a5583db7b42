#ifndef SHRINKLAB_CHECKPOINT_H_
#define SHRINKLAB_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shrinklab/nn.h"

namespace shrinklab {

// On disk: one line of compact JSON
//   {"format":"shrinklab-checkpoint","version":1,
//    "tensors":[{"name":...,"shape":[...]},...]}\n
// followed by every tensor's elements as little-endian float64, in header
// order, row-major.
class Checkpoint {
 public:
  struct Tensor {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<double> data;
  };

  void add(std::string name, std::vector<int64_t> shape,
           std::span<const double> data);
  void add(std::span<const TensorRef> refs);
  void add_matrix(std::string name, const Matrix& m);
  void add_vector(std::string name, const Vector& v);

  bool contains(std::string_view name) const;
  // Throws FormatError when absent.
  const Tensor& get(std::string_view name) const;
  Matrix get_matrix(std::string_view name) const;
  Vector get_vector(std::string_view name) const;

  // Copies stored values into `refs` (matched by name, shapes checked).
  void load_into(std::span<const TensorRef> refs) const;

  const std::vector<Tensor>& tensors() const { return tensors_; }

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void write(const std::filesystem::path& path) const;
  static Checkpoint read(const std::filesystem::path& path);

 private:
  std::vector<Tensor> tensors_;
};

// Rebuilds networks from tensor shapes. mlp_from_checkpoint(ckpt, "encoder")
// works on encoder-only checkpoints.
Mlp mlp_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix);
MlpParams params_from_checkpoint(const Checkpoint& ckpt);

}  // namespace shrinklab

#endif  // SHRINKLAB_CHECKPOINT_H_
