#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rs2g/random.hpp"

namespace rs2g {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);

// When enabled, every op output is scanned for NaN/Inf. Defaults to on in
// debug builds. User-constructed tensors are always validated.
void set_debug_checks(bool enabled);
bool debug_checks();

class Tape;

// Dense row-major tensor of doubles (rank 1 or 2 in practice). Copies are
// shallow: they share the underlying buffer and tape attachment, so a
// parameter registered in several places stays in sync.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);
  static Tensor column(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  static Tensor identity(int n);
  // Entries uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
  static Tensor uniform_init(Shape shape, int fan_in, Rng& rng);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only
  std::size_t numel() const;
  bool is_scalar() const { return numel() == 1; }

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();
  double at(int i) const;
  double at(int i, int j) const;
  double scalar_value() const;

  Tensor clone() const;  // deep copy, detached

  bool requires_grad() const;
  void set_requires_grad(bool value);

  Tape* tape() const;
  int node() const;
  bool attached() const { return tape() != nullptr; }
  void attach(Tape& tape);
  void detach();

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    Tape* tape = nullptr;
    int node = -1;
  };
  std::shared_ptr<Impl> impl_;

  friend class Tape;
  Impl& impl();
  const Impl& impl() const;
  void check_defined() const;
};

// Reverse-mode gradient tape. Ops append records in execution order
// (inputs always precede their consumers); backward() replays them once
// in reverse. Single-writer: one logical thread per tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int alloc(std::size_t size);
  std::vector<double>& grad(int node);
  const std::vector<double>& grad(int node) const;
  void record(std::function<void(Tape&)> backward_fn);

  // Seeds d(loss)/d(loss)=1 and runs every record in reverse. Errors if
  // loss is not a scalar attached to this tape, or if already run.
  void backward(const Tensor& loss);

  std::size_t num_records() const { return records_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  std::vector<std::vector<double>> grads_;
  std::vector<std::function<void(Tape&)>> records_;
  bool backward_done_ = false;
};

// ---- op vocabulary ----
// Binary elementwise ops broadcast the second operand when it is a scalar,
// a column [n,1] against [n,m], or a row [1,m] against [n,m].
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double c);
Tensor mul_scalar(const Tensor& x, double c);
Tensor div_scalar(const Tensor& x, double c);
Tensor clamp_min(const Tensor& x, double floor);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, int axis);

Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);

Tensor sum(const Tensor& x);                // all entries -> [1]
Tensor sum(const Tensor& x, int axis);      // rank-2, keeps the reduced dim
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis);
Tensor reduce_max(const Tensor& x);
Tensor reduce_max(const Tensor& x, int axis);

// out[i, :] = x[indices[i], :]
Tensor gather_rows(const Tensor& x, const std::vector<int>& indices);
// out[i, j] = x[row_idx[i], col_idx[j]]
Tensor submatrix(const Tensor& x, const std::vector<int>& row_idx,
                 const std::vector<int>& col_idx);
// Scatters a column of n*(n-1) pair scores (ordered pairs (j,k), j != k,
// row-major) into an n-by-n matrix with zero diagonal.
Tensor pairwise_to_square(const Tensor& scores, int n);

// Numerically stable fused cross-entropy over a logit row; returns [1].
Tensor softmax_cross_entropy(const Tensor& logits, int target);

}  // namespace rs2g
