#include "rs2g/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace rs2g {

namespace {

bool g_debug_checks =
#ifdef NDEBUG
    false;
#else
    true;
#endif

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void check_finite(const std::vector<double>& data, const char* where) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(where) +
                               ": non-finite value encountered");
    }
  }
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a,
                              const Shape& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_str(a) +
                              " vs " + shape_str(b));
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks() { return g_debug_checks; }

// ---- Tensor ----

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw std::invalid_argument("Tensor: empty shape");
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("Tensor: non-positive dimension in " +
                                  shape_str(shape));
    }
  }
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument(
        "Tensor: shape " + shape_str(shape) + " wants " +
        std::to_string(shape_numel(shape)) + " scalars, got " +
        std::to_string(data.size()));
  }
  check_finite(data, "Tensor");
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({n, 1}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(int n) {
  std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) data[static_cast<std::size_t>(i) * n + i] = 1.0;
  return Tensor({n, n}, std::move(data));
}

Tensor Tensor::uniform_init(Shape shape, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw std::invalid_argument("uniform_init: fan_in <= 0");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(data), true);
}

void Tensor::check_defined() const {
  if (!impl_) throw std::runtime_error("Tensor: used before initialization");
}

Tensor::Impl& Tensor::impl() {
  check_defined();
  return *impl_;
}
const Tensor::Impl& Tensor::impl() const {
  check_defined();
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
int Tensor::rank() const { return static_cast<int>(impl().shape.size()); }

int Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor is not rank-2");
  return impl().shape[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor is not rank-2");
  return impl().shape[1];
}

std::size_t Tensor::numel() const { return impl().data.size(); }
const std::vector<double>& Tensor::data() const { return impl().data; }
std::vector<double>& Tensor::mutable_data() { return impl().data; }

double Tensor::at(int i) const {
  return impl().data.at(static_cast<std::size_t>(i));
}

double Tensor::at(int i, int j) const {
  const int c = cols();
  return impl().data.at(static_cast<std::size_t>(i) * c + j);
}

double Tensor::scalar_value() const {
  if (!is_scalar()) {
    throw std::invalid_argument("scalar_value(): tensor has shape " +
                                shape_str(shape()));
  }
  return impl().data[0];
}

Tensor Tensor::clone() const {
  return Tensor(impl().shape, impl().data, impl().requires_grad);
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool value) { impl().requires_grad = value; }

Tape* Tensor::tape() const { return impl().tape; }
int Tensor::node() const { return impl().node; }

void Tensor::attach(Tape& tape) {
  auto& im = impl();
  im.requires_grad = true;
  im.tape = &tape;
  im.node = tape.alloc(im.data.size());
}

void Tensor::detach() {
  auto& im = impl();
  im.tape = nullptr;
  im.node = -1;
}

// ---- Tape ----

int Tape::alloc(std::size_t size) {
  grads_.emplace_back(size, 0.0);
  return static_cast<int>(grads_.size()) - 1;
}

std::vector<double>& Tape::grad(int node) {
  return grads_.at(static_cast<std::size_t>(node));
}

const std::vector<double>& Tape::grad(int node) const {
  return grads_.at(static_cast<std::size_t>(node));
}

void Tape::record(std::function<void(Tape&)> backward_fn) {
  records_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (backward_done_) {
    throw std::runtime_error("Tape::backward: already run on this tape");
  }
  if (!loss.is_scalar()) {
    throw std::invalid_argument("Tape::backward: loss has shape " +
                                shape_str(loss.shape()) + ", expected scalar");
  }
  if (loss.tape() != this) {
    throw std::invalid_argument(
        "Tape::backward: loss is not attached to this tape");
  }
  grad(loss.node())[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)(*this);
  backward_done_ = true;
}

// ---- op plumbing ----

namespace {

Tape* result_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->defined() || !t->attached()) continue;
    if (tape && tape != t->tape()) {
      throw std::invalid_argument("op mixes tensors from two live tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   Tape* tape) {
  if (g_debug_checks) {
    for (double v : data) {
      if (!std::isfinite(v)) {
        throw std::runtime_error(std::string(op) +
                                 ": non-finite value in result");
      }
    }
  }
  Tensor out(std::move(shape), std::move(data));
  if (tape) out.attach(*tape);
  return out;
}

enum class Bc { kSame, kScalar, kCol, kRow };

Bc broadcast_kind(const std::string& op, const Shape& a, const Shape& b) {
  if (a == b) return Bc::kSame;
  if (shape_numel(b) == 1) return Bc::kScalar;
  if (a.size() == 2 && b.size() == 2) {
    if (b[0] == a[0] && b[1] == 1) return Bc::kCol;
    if (b[0] == 1 && b[1] == a[1]) return Bc::kRow;
  }
  shape_error(op, a, b);
}

std::size_t broadcast_index(Bc kind, std::size_t flat, int cols) {
  switch (kind) {
    case Bc::kSame:
      return flat;
    case Bc::kScalar:
      return 0;
    case Bc::kCol:
      return flat / static_cast<std::size_t>(cols);
    case Bc::kRow:
      return flat % static_cast<std::size_t>(cols);
  }
  return 0;
}

template <typename Fwd, typename Bwd>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
                 Bwd bwd) {
  const Bc kind = broadcast_kind(op, a.shape(), b.shape());
  const int cols = a.rank() == 2 ? a.cols() : 1;
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = fwd(av[i], bv[broadcast_index(kind, i, cols)]);
  }
  Tape* tape = result_tape({&a, &b});
  Tensor result = make_result(op, a.shape(), std::move(out), tape);
  if (tape) {
    const int na = a.node(), nb = b.node(), no = result.node();
    Tensor ac = a, bc = b;  // keep buffers alive for the backward pass
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      const auto& avd = ac.data();
      const auto& bvd = bc.data();
      std::vector<double>* ga = na >= 0 ? &t.grad(na) : nullptr;
      std::vector<double>* gb = nb >= 0 ? &t.grad(nb) : nullptr;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t bi = broadcast_index(kind, i, cols);
        double da = 0.0, db = 0.0;
        bwd(avd[i], bvd[bi], g[i], da, db);
        if (ga) (*ga)[i] += da;
        if (gb) (*gb)[bi] += db;
      }
    });
  }
  return result;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* op, const Tensor& x, Fwd fwd, Bwd bwd) {
  const auto& xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  Tape* tape = result_tape({&x});
  Tensor result = make_result(op, x.shape(), std::move(out), tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    Tensor xc = x, oc = result;
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      const auto& xvd = xc.data();
      const auto& ovd = oc.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * bwd(xvd[i], ovd[i]);
      }
    });
  }
  return result;
}

// C += A(m,k) * B(k,n), all row-major.
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A(m,k) * B(n,k)^T
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A(k,m)^T * B(k,n)
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary_op(
      "maximum", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double g, double& da, double& db) {
        if (x >= y) {
          da = g;
        } else {
          db = g;
        }
      });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary_op(
      "add_scalar", x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double c) {
  return unary_op(
      "mul_scalar", x, [c](double v) { return v * c; },
      [c](double, double) { return c; });
}

Tensor div_scalar(const Tensor& x, double c) {
  if (c == 0.0) throw std::invalid_argument("div_scalar: divide by zero");
  return mul_scalar(x, 1.0 / c);
}

Tensor clamp_min(const Tensor& x, double floor) {
  return unary_op(
      "clamp_min", x, [floor](double v) { return v > floor ? v : floor; },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  Tape* tape = result_tape({&a, &b});
  Tensor result = make_result("matmul", {m, n}, std::move(out), tape);
  if (tape) {
    const int na = a.node(), nb = b.node(), no = result.node();
    Tensor ac = a, bc = b;
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      if (na >= 0) {
        mm_nt(g.data(), bc.data().data(), t.grad(na).data(), m, n, k);
      }
      if (nb >= 0) {
        mm_tn(ac.data().data(), g.data(), t.grad(nb).data(), k, m, n);
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) {
    throw std::invalid_argument("transpose: rank-2 required, got " +
                                shape_str(x.shape()));
  }
  const int m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  const auto& xv = x.data();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(j) * m + i] =
          xv[static_cast<std::size_t>(i) * n + j];
    }
  }
  Tape* tape = result_tape({&x});
  Tensor result = make_result("transpose", {n, m}, std::move(out), tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          gx[static_cast<std::size_t>(i) * n + j] +=
              g[static_cast<std::size_t>(j) * m + i];
        }
      }
    });
  }
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const int rank = parts[0].rank();
  if (rank == 1) {
    if (axis != 0) throw std::invalid_argument("concat: rank-1 wants axis 0");
    std::size_t total = 0;
    for (const auto& p : parts) {
      if (p.rank() != 1) shape_error("concat", parts[0].shape(), p.shape());
      total += p.numel();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const auto& p : parts) {
      out.insert(out.end(), p.data().begin(), p.data().end());
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    Tape* tape = nullptr;
    for (const auto& p : parts) {
      if (p.attached()) {
        if (tape && tape != p.tape()) {
          throw std::invalid_argument("concat mixes tensors from two tapes");
        }
        tape = p.tape();
      }
    }
    Tensor result =
        make_result("concat", {static_cast<int>(total)}, std::move(out), tape);
    if (tape) {
      std::vector<int> nodes;
      std::vector<std::size_t> sizes;
      for (const auto& p : parts) {
        nodes.push_back(p.node());
        sizes.push_back(p.numel());
      }
      const int no = result.node();
      tape->record([=](Tape& t) {
        const auto& g = t.grad(no);
        std::size_t off = 0;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
          if (nodes[p] >= 0) {
            auto& gp = t.grad(nodes[p]);
            for (std::size_t i = 0; i < sizes[p]; ++i) gp[i] += g[off + i];
          }
          off += sizes[p];
        }
      });
    }
    return result;
  }

  if (rank != 2 || (axis != 0 && axis != 1)) {
    throw std::invalid_argument("concat: rank-2 with axis 0 or 1 required");
  }
  int rows_total = parts[0].rows(), cols_total = parts[0].cols();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const auto& t = parts[p];
    if (t.rank() != 2) shape_error("concat", parts[0].shape(), t.shape());
    if (axis == 0) {
      if (t.cols() != cols_total) {
        shape_error("concat", parts[0].shape(), t.shape());
      }
      rows_total += t.rows();
    } else {
      if (t.rows() != rows_total) {
        shape_error("concat", parts[0].shape(), t.shape());
      }
      cols_total += t.cols();
    }
  }
  if (axis == 0) cols_total = parts[0].cols();
  if (axis == 1) rows_total = parts[0].rows();

  std::vector<double> out(static_cast<std::size_t>(rows_total) * cols_total);
  std::size_t offset = 0;  // row offset (axis 0) or col offset (axis 1)
  for (const auto& p : parts) {
    const auto& pv = p.data();
    const int pr = p.rows(), pc = p.cols();
    for (int i = 0; i < pr; ++i) {
      for (int j = 0; j < pc; ++j) {
        const std::size_t oi = axis == 0 ? offset + i : static_cast<std::size_t>(i);
        const std::size_t oj = axis == 0 ? static_cast<std::size_t>(j) : offset + j;
        out[oi * cols_total + oj] = pv[static_cast<std::size_t>(i) * pc + j];
      }
    }
    offset += axis == 0 ? static_cast<std::size_t>(pr)
                        : static_cast<std::size_t>(pc);
  }

  Tape* tape = nullptr;
  for (const auto& p : parts) {
    if (p.attached()) {
      if (tape && tape != p.tape()) {
        throw std::invalid_argument("concat mixes tensors from two tapes");
      }
      tape = p.tape();
    }
  }
  Tensor result =
      make_result("concat", {rows_total, cols_total}, std::move(out), tape);
  if (tape) {
    struct PartInfo {
      int node, rows, cols;
    };
    std::vector<PartInfo> infos;
    for (const auto& p : parts) infos.push_back({p.node(), p.rows(), p.cols()});
    const int no = result.node();
    const int out_cols = cols_total;
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      std::size_t off = 0;
      for (const auto& info : infos) {
        if (info.node >= 0) {
          auto& gp = t.grad(info.node);
          for (int i = 0; i < info.rows; ++i) {
            for (int j = 0; j < info.cols; ++j) {
              const std::size_t oi =
                  axis == 0 ? off + i : static_cast<std::size_t>(i);
              const std::size_t oj =
                  axis == 0 ? static_cast<std::size_t>(j) : off + j;
              gp[static_cast<std::size_t>(i) * info.cols + j] +=
                  g[oi * out_cols + oj];
            }
          }
        }
        off += axis == 0 ? static_cast<std::size_t>(info.rows)
                         : static_cast<std::size_t>(info.cols);
      }
    });
  }
  return result;
}

// ---- activations ----

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Tensor tanh_op(const Tensor& x) {
  return unary_op(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double o) { return 1.0 - o * o; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  if (x.rank() == 1) axis = 1;  // treat a vector as one row
  if (x.rank() == 2 && axis != 0 && axis != 1) {
    throw std::invalid_argument("softmax: axis must be 0 or 1");
  }
  const int rows = x.rank() == 1 ? 1 : x.rows();
  const int cols = x.rank() == 1 ? static_cast<int>(x.numel()) : x.cols();
  // Lane layout: axis 1 -> softmax over each row; axis 0 -> over each column.
  const int lanes = axis == 1 ? rows : cols;
  const int lane_len = axis == 1 ? cols : rows;
  const auto& xv = x.data();
  auto index = [axis, cols](int lane, int i) -> std::size_t {
    return axis == 1 ? static_cast<std::size_t>(lane) * cols + i
                     : static_cast<std::size_t>(i) * cols + lane;
  };
  std::vector<double> out(xv.size());
  for (int lane = 0; lane < lanes; ++lane) {
    double mx = xv[index(lane, 0)];
    for (int i = 1; i < lane_len; ++i) mx = std::max(mx, xv[index(lane, i)]);
    double denom = 0.0;
    for (int i = 0; i < lane_len; ++i) {
      const double e = std::exp(xv[index(lane, i)] - mx);
      out[index(lane, i)] = e;
      denom += e;
    }
    for (int i = 0; i < lane_len; ++i) out[index(lane, i)] /= denom;
  }
  Tape* tape = result_tape({&x});
  Tensor result = make_result("softmax", x.shape(), std::move(out), tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    Tensor oc = result;
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      const auto& ov = oc.data();
      for (int lane = 0; lane < lanes; ++lane) {
        double dot = 0.0;
        for (int i = 0; i < lane_len; ++i) {
          dot += g[index(lane, i)] * ov[index(lane, i)];
        }
        for (int i = 0; i < lane_len; ++i) {
          const std::size_t ix = index(lane, i);
          gx[ix] += ov[ix] * (g[ix] - dot);
        }
      }
    });
  }
  return result;
}

// ---- reductions ----

namespace {

Tensor reduce_all(const char* op, const Tensor& x, double scale) {
  const auto& xv = x.data();
  double acc = 0.0;
  for (double v : xv) acc += v;
  acc *= scale;
  Tape* tape = result_tape({&x});
  Tensor result = make_result(op, {1}, {acc}, tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    const std::size_t n = xv.size();
    tape->record([=](Tape& t) {
      const double g = t.grad(no)[0] * scale;
      auto& gx = t.grad(nx);
      for (std::size_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return result;
}

Tensor reduce_axis(const char* op, const Tensor& x, int axis, double scale) {
  if (x.rank() != 2 || (axis != 0 && axis != 1)) {
    throw std::invalid_argument(std::string(op) +
                                ": rank-2 with axis 0 or 1 required, got " +
                                shape_str(x.shape()));
  }
  const int rows = x.rows(), cols = x.cols();
  const auto& xv = x.data();
  Shape out_shape = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
  std::vector<double> out(shape_numel(out_shape), 0.0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      out[axis == 0 ? j : i] += xv[static_cast<std::size_t>(i) * cols + j];
    }
  }
  for (double& v : out) v *= scale;
  Tape* tape = result_tape({&x});
  Tensor result = make_result(op, out_shape, std::move(out), tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          gx[static_cast<std::size_t>(i) * cols + j] +=
              g[axis == 0 ? j : i] * scale;
        }
      }
    });
  }
  return result;
}

}  // namespace

Tensor sum(const Tensor& x) { return reduce_all("sum", x, 1.0); }

Tensor sum(const Tensor& x, int axis) { return reduce_axis("sum", x, axis, 1.0); }

Tensor mean(const Tensor& x) {
  return reduce_all("mean", x, 1.0 / static_cast<double>(x.numel()));
}

Tensor mean(const Tensor& x, int axis) {
  const double n = axis == 0 ? x.rows() : x.cols();
  return reduce_axis("mean", x, axis, 1.0 / n);
}

Tensor reduce_max(const Tensor& x) {
  const auto& xv = x.data();
  std::size_t arg = 0;
  for (std::size_t i = 1; i < xv.size(); ++i) {
    if (xv[i] > xv[arg]) arg = i;
  }
  Tape* tape = result_tape({&x});
  Tensor result = make_result("max", {1}, {xv[arg]}, tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    tape->record([=](Tape& t) { t.grad(nx)[arg] += t.grad(no)[0]; });
  }
  return result;
}

Tensor reduce_max(const Tensor& x, int axis) {
  if (x.rank() != 2 || (axis != 0 && axis != 1)) {
    throw std::invalid_argument("max: rank-2 with axis 0 or 1 required, got " +
                                shape_str(x.shape()));
  }
  const int rows = x.rows(), cols = x.cols();
  const auto& xv = x.data();
  const int lanes = axis == 0 ? cols : rows;
  const int lane_len = axis == 0 ? rows : cols;
  auto index = [=](int lane, int i) -> std::size_t {
    return axis == 0 ? static_cast<std::size_t>(i) * cols + lane
                     : static_cast<std::size_t>(lane) * cols + i;
  };
  Shape out_shape = axis == 0 ? Shape{1, cols} : Shape{rows, 1};
  std::vector<double> out(static_cast<std::size_t>(lanes));
  std::vector<std::size_t> argmax(static_cast<std::size_t>(lanes));
  for (int lane = 0; lane < lanes; ++lane) {
    std::size_t best = index(lane, 0);
    for (int i = 1; i < lane_len; ++i) {
      const std::size_t ix = index(lane, i);
      if (xv[ix] > xv[best]) best = ix;
    }
    out[static_cast<std::size_t>(lane)] = xv[best];
    argmax[static_cast<std::size_t>(lane)] = best;
  }
  Tape* tape = result_tape({&x});
  Tensor result = make_result("max", out_shape, std::move(out), tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      for (std::size_t lane = 0; lane < argmax.size(); ++lane) {
        gx[argmax[lane]] += g[lane];
      }
    });
  }
  return result;
}

// ---- structural ops ----

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
  if (x.rank() != 2) {
    throw std::invalid_argument("gather_rows: rank-2 required, got " +
                                shape_str(x.shape()));
  }
  const int rows = x.rows(), cols = x.cols();
  for (int ix : indices) {
    if (ix < 0 || ix >= rows) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(ix) +
                                  " out of range for " + shape_str(x.shape()));
    }
  }
  const auto& xv = x.data();
  std::vector<double> out(indices.size() * static_cast<std::size_t>(cols));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = xv.data() + static_cast<std::size_t>(indices[i]) * cols;
    std::copy(src, src + cols, out.data() + i * cols);
  }
  Tape* tape = result_tape({&x});
  Tensor result = make_result(
      "gather_rows", {static_cast<int>(indices.size()), cols}, std::move(out),
      tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    const std::vector<int> idx = indices;
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (int j = 0; j < cols; ++j) {
          gx[static_cast<std::size_t>(idx[i]) * cols + j] += g[i * cols + j];
        }
      }
    });
  }
  return result;
}

Tensor submatrix(const Tensor& x, const std::vector<int>& row_idx,
                 const std::vector<int>& col_idx) {
  if (x.rank() != 2) {
    throw std::invalid_argument("submatrix: rank-2 required, got " +
                                shape_str(x.shape()));
  }
  const int rows = x.rows(), cols = x.cols();
  for (int ix : row_idx) {
    if (ix < 0 || ix >= rows) {
      throw std::invalid_argument("submatrix: row index out of range");
    }
  }
  for (int ix : col_idx) {
    if (ix < 0 || ix >= cols) {
      throw std::invalid_argument("submatrix: col index out of range");
    }
  }
  const auto& xv = x.data();
  std::vector<double> out(row_idx.size() * col_idx.size());
  for (std::size_t i = 0; i < row_idx.size(); ++i) {
    for (std::size_t j = 0; j < col_idx.size(); ++j) {
      out[i * col_idx.size() + j] =
          xv[static_cast<std::size_t>(row_idx[i]) * cols + col_idx[j]];
    }
  }
  Tape* tape = result_tape({&x});
  Tensor result = make_result(
      "submatrix",
      {static_cast<int>(row_idx.size()), static_cast<int>(col_idx.size())},
      std::move(out), tape);
  if (tape) {
    const int nx = x.node(), no = result.node();
    const std::vector<int> ri = row_idx, ci = col_idx;
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gx = t.grad(nx);
      for (std::size_t i = 0; i < ri.size(); ++i) {
        for (std::size_t j = 0; j < ci.size(); ++j) {
          gx[static_cast<std::size_t>(ri[i]) * cols + ci[j]] +=
              g[i * ci.size() + j];
        }
      }
    });
  }
  return result;
}

Tensor pairwise_to_square(const Tensor& scores, int n) {
  const std::size_t expected = static_cast<std::size_t>(n) * (n - 1);
  if (scores.numel() != expected) {
    throw std::invalid_argument(
        "pairwise_to_square: got " + std::to_string(scores.numel()) +
        " scores for n=" + std::to_string(n) + " (want " +
        std::to_string(expected) + ")");
  }
  const auto& sv = scores.data();
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  std::size_t p = 0;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (j == k) continue;
      out[static_cast<std::size_t>(j) * n + k] = sv[p++];
    }
  }
  Tape* tape = result_tape({&scores});
  Tensor result =
      make_result("pairwise_to_square", {n, n}, std::move(out), tape);
  if (tape) {
    const int ns = scores.node(), no = result.node();
    tape->record([=](Tape& t) {
      const auto& g = t.grad(no);
      auto& gs = t.grad(ns);
      std::size_t q = 0;
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          if (j == k) continue;
          gs[q++] += g[static_cast<std::size_t>(j) * n + k];
        }
      }
    });
  }
  return result;
}

Tensor softmax_cross_entropy(const Tensor& logits, int target) {
  const int classes = static_cast<int>(logits.numel());
  if (logits.rank() == 2 && logits.rows() != 1) {
    throw std::invalid_argument("softmax_cross_entropy: logits must be a row");
  }
  if (target < 0 || target >= classes) {
    throw std::invalid_argument("softmax_cross_entropy: target " +
                                std::to_string(target) + " out of range");
  }
  const auto& lv = logits.data();
  double mx = lv[0];
  for (double v : lv) mx = std::max(mx, v);
  double denom = 0.0;
  for (double v : lv) denom += std::exp(v - mx);
  const double lse = mx + std::log(denom);
  const double loss = lse - lv[static_cast<std::size_t>(target)];
  Tape* tape = result_tape({&logits});
  Tensor result = make_result("softmax_cross_entropy", {1}, {loss}, tape);
  if (tape) {
    const int nl = logits.node(), no = result.node();
    Tensor lc = logits;
    tape->record([=](Tape& t) {
      const double g = t.grad(no)[0];
      auto& gl = t.grad(nl);
      const auto& lvd = lc.data();
      double m2 = lvd[0];
      for (double v : lvd) m2 = std::max(m2, v);
      double d2 = 0.0;
      for (double v : lvd) d2 += std::exp(v - m2);
      for (std::size_t i = 0; i < lvd.size(); ++i) {
        const double p = std::exp(lvd[i] - m2) / d2;
        gl[i] += g * (p - (static_cast<int>(i) == target ? 1.0 : 0.0));
      }
    });
  }
  return result;
}

}  // namespace rs2g
