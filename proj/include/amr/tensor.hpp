#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace amr {

class Tape;

/// Dense row-major tensor of 64-bit floats. Copies share storage; clone()
/// makes a deep copy. A tensor optionally carries a node id on the recording
/// it was produced on (valid only while tape_id matches the active tape).
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<double>> data;
  bool requires_grad = false;

  mutable std::uint64_t tape_id = 0;
  mutable int node = -1;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from(std::vector<int> shape, std::vector<double> values);
  static Tensor uniform(std::vector<int> shape, double lo, double hi,
                        std::mt19937_64& rng);

  std::size_t size() const { return data ? data->size() : 0; }
  int rank() const { return static_cast<int>(shape.size()); }
  double* ptr() { return data->data(); }
  const double* ptr() const { return data->data(); }
  double at(std::size_t i) const { return (*data)[i]; }
  double& at(std::size_t i) { return (*data)[i]; }

  /// Deep copy detached from any recording.
  Tensor clone() const;
  /// Shares storage but drops the recording reference.
  Tensor detached() const;

  std::string shape_str() const;
  /// Node id on the given tape, or -1 when not recorded there.
  int node_on(const Tape& tape) const;
};

using BackwardFn = std::function<void(Tape&, const std::vector<double>&)>;

/// A recording of tensor operations for reverse-mode differentiation.
/// Rebuilt per forward pass; confined to one thread. Constructing a Tape
/// makes it the active recording on this thread until it is destroyed.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::uint64_t id() const { return id_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Registers a leaf tensor so gradients accumulate for it.
  void watch(Tensor& t);

  /// Appends an operation node. `parents` may contain -1 for unrecorded
  /// inputs; `len` is the element count of the node's value.
  int record(const char* kind, std::vector<int> parents, std::size_t len,
             BackwardFn backward);

  /// Reverse-mode sweep from a scalar loss. Callable once per recording.
  void backward(const Tensor& loss);

  /// Gradient of a recorded tensor after backward(); zeros when none flowed.
  std::vector<double> grad(const Tensor& t) const;
  bool has_grad(const Tensor& t) const;

  /// Gradient buffer of a node, allocated on first touch. For backward fns.
  std::vector<double>& accum(int node_id);

 private:
  struct Node {
    const char* kind;
    std::vector<int> parents;
    std::size_t len;
    BackwardFn backward;
  };

  std::uint64_t id_;
  Tape* prev_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool backward_done_ = false;
};

// ---- recorded operations ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// a[n x k] * b[k x m] -> [n x m]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<int> shape);

/// Last-axis concatenation; all parts agree on every extent but the last.
Tensor concat_last(const std::vector<Tensor>& parts);
/// Stacks equal-shape rows ([w] or [1 x w]) into [T x w].
Tensor stack_rows(const std::vector<Tensor>& rows);
/// Last-axis slice [offset, offset+extent).
Tensor slice_last(const Tensor& a, int offset, int extent);
/// First-axis slice of a matrix.
Tensor slice_rows(const Tensor& a, int offset, int extent);
/// Tiles a vector [w] into [n x w]; backward sums over rows.
Tensor expand_rows(const Tensor& v, int n);
/// Row gather from a matrix; backward scatter-adds (duplicate ids fold).
Tensor gather_rows(const Tensor& m, const std::vector<int>& ids);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

/// Per-row softmax over unmasked positions; masked outputs are exactly 0.
/// mask is row-major [rows x cols], nonzero = participates.
Tensor softmax_masked(const Tensor& a, const std::vector<std::uint8_t>& mask);

/// Per-dimension max over unmasked steps of a [T x d] sequence; gradient
/// routes to the earliest argmax step.
Tensor max_over_time(const Tensor& a, const std::vector<std::uint8_t>& mask);

/// Inverted-scaling dropout; identity when not training or rate is 0.
Tensor dropout(const Tensor& a, double rate, bool training, std::mt19937_64& rng);

/// Selects one element by flat index -> scalar [1].
Tensor pick(const Tensor& a, std::size_t index);
Tensor sum(const Tensor& a);
Tensor scale(const Tensor& a, double c);
/// Elementwise multiply by a scalar tensor [1]; both sides get gradients.
Tensor scale_by(const Tensor& a, const Tensor& s);

/// Mean over rows of -log(max(p[i, label_i], 1e-12)) for probs [B x 2].
Tensor nll_mean(const Tensor& probs, const std::vector<int>& labels);

// ---- gradient checking ----

struct GradCheckEntry {
  std::size_t index;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool pass = true;
  GradCheckEntry worst{};
};

/// Compares the recorded gradient of f (scalar-valued) at `at` against
/// central finite differences with step h. Relative error uses a floor of
/// 1e-6 on the denominator so agreeing near-zero pairs pass.
GradCheckReport grad_check(const std::function<Tensor(Tensor&)>& f,
                           const Tensor& at, double h, double tol);

}  // namespace amr
