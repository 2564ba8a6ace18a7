#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "phifno/fft.hpp"

namespace phifno::ad {

struct Shape {
  std::array<int, 4> d{1, 1, 1, 1};
  int rank = 0;

  static Shape scalar() { return {{1, 1, 1, 1}, 1}; }
  static Shape vec(int n) { return {{n, 1, 1, 1}, 1}; }
  static Shape mat(int a, int b) { return {{a, b, 1, 1}, 2}; }
  static Shape grid4(int b, int c, int x, int y) { return {{b, c, x, y}, 4}; }

  int64_t numel() const {
    int64_t n = 1;
    for (int k = 0; k < rank; ++k) n *= d[k];
    return n;
  }
  bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }
};

class Tape;

// Value plus an optional handle into the tape that produced it. Copies share
// storage; values are treated as immutable once an op has consumed them.
class Tensor {
 public:
  Tensor() = default;
  static Tensor constant(const Shape& s, std::vector<double> values);
  static Tensor zeros(const Shape& s) {
    return constant(s, std::vector<double>(s.numel(), 0.0));
  }

  const Shape& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }
  const std::vector<double>& values() const { return *data_; }
  double value_at(int64_t k) const { return (*data_)[k]; }
  bool tracked() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  friend Tensor record_op(Tape* tape, const Shape& out_shape,
                          std::vector<double> values,
                          std::function<void(Tape&, int)> vjp);
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  int node_ = -1;
  Tape* tape_ = nullptr;
};

// Append-only operation record. Node order is a topological order, so the
// backward sweep is a single reverse pass touching only nodes whose gradient
// was materialized by a downstream op.
class Tape {
 public:
  Tensor leaf(const Shape& s, std::vector<double> values);

  // Seeds d(scalar)/d(scalar) = 1 and runs every recorded vector-Jacobian
  // product in reverse order. scalar must be a single-element tracked tensor.
  void backward(const Tensor& scalar);

  // Gradient of the given tracked tensor after backward(); zeros if the
  // tensor never influenced the seeded scalar.
  const std::vector<double>& grad(const Tensor& t);

  size_t n_nodes() const { return nodes_.size(); }

 private:
  friend Tensor record_op(Tape* tape, const Shape& out_shape,
                          std::vector<double> values,
                          std::function<void(Tape&, int)> vjp);
  struct Node {
    Shape shape;
    std::function<void(Tape&, int)> vjp;  // empty for leaves
    std::vector<double> grad;
    bool touched = false;
  };
  std::vector<Node> nodes_;

 public:
  // Accumulation buffer for a node, zero-initialized on first touch.
  // Public for the op implementations; not meant for user code.
  std::vector<double>& grad_buffer(int node);
  const std::vector<double>* grad_if_touched(int node) const {
    return nodes_[node].touched ? &nodes_[node].grad : nullptr;
  }
};

// Boolean pixel masks for a batch; b == 1 broadcasts over the batch.
struct MaskStack {
  int b = 0, nx = 0, ny = 0;
  std::vector<std::uint8_t> v;  // [b][x][y] row-major

  bool at(int bi, int i, int j) const {
    int use = (b == 1) ? 0 : bi;
    return v[(static_cast<size_t>(use) * nx + i) * ny + j] != 0;
  }
};

// Elementwise arithmetic (equal shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Reductions to single-element tensors, and per-batch masked reduction.
Tensor sum(const Tensor& a);
Tensor sq_sum(const Tensor& a);
Tensor masked_sq_norm(const Tensor& x, const MaskStack& masks);

// x * Phi(x) with the exact normal CDF.
Tensor gelu(const Tensor& x);

// out[b,o,i,j] = sum_i' W[o,i'] * X[b,i',i,j] + B[o]
Tensor pointwise_affine(const Tensor& x, const Tensor& w, const Tensor& b);

// Per-channel fixed affine map with constant coefficients (standardization).
Tensor channel_affine(const Tensor& x, const std::vector<double>& scale,
                      const std::vector<double>& shift);

// Truncated spectral convolution. w holds complex mode weights for the
// low-frequency corner, stored real-interleaved as [c_in, c_out, m, 2m]:
// entry (i, o, kx, ky) sits at [i][o][kx][2*ky] (real) and [..][2*ky+1]
// (imaginary). Modes with kx >= m or ky >= m are zeroed.
Tensor spectral_conv(const Tensor& x, const Tensor& w, int m);

// Reflection padding without edge repetition ([1,2,3], p=1 -> [2,1,2,3,2])
// on the two spatial axes, and its inverse crop.
Tensor reflection_pad(const Tensor& x, int p);
Tensor crop(const Tensor& x, int p);

// Centered differences over the spatial axes, zero on the border rows/cols.
Tensor central_diff_x(const Tensor& x, double delta);
Tensor central_diff_y(const Tensor& x, double delta);

}  // namespace phifno::ad
