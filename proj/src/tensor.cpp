#include "amr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "amr/kernels.hpp"

namespace amr {

namespace {

thread_local Tape* t_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_counter{1};

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

[[noreturn]] void dim_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": dimension error, " + detail);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    dim_error(op, "shapes " + a.shape_str() + " and " + b.shape_str() + " differ");
  }
}

int last_extent(const Tensor& t) { return t.shape.empty() ? 1 : t.shape.back(); }

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  std::size_t n = shape_numel(shape);
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data->begin(), t.data->end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("Tensor::from: value count does not match shape");
  }
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi,
                       std::mt19937_64& rng) {
  Tensor t = zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : *t.data) v = dist(rng);
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape = shape;
  t.data = std::make_shared<std::vector<double>>(*data);
  t.requires_grad = requires_grad;
  return t;
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape = shape;
  t.data = data;
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int Tensor::node_on(const Tape& tape) const {
  return tape_id == tape.id() ? node : -1;
}

// ------------------------------------------------------------------ Tape

Tape::Tape() : id_(g_tape_counter.fetch_add(1, std::memory_order_relaxed)) {
  prev_ = t_active_tape;
  t_active_tape = this;
}

Tape::~Tape() { t_active_tape = prev_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::watch(Tensor& t) {
  if (!t.requires_grad) {
    throw std::logic_error("Tape::watch: tensor does not require gradients");
  }
  if (t.tape_id == id_ && t.node >= 0) return;
  t.tape_id = id_;
  t.node = record("leaf", {}, t.size(), nullptr);
}

int Tape::record(const char* kind, std::vector<int> parents, std::size_t len,
                 BackwardFn backward) {
  nodes_.push_back(Node{kind, std::move(parents), len, std::move(backward)});
  return static_cast<int>(nodes_.size() - 1);
}

void Tape::backward(const Tensor& loss) {
  if (backward_done_) {
    throw std::logic_error("Tape::backward: already ran on this recording");
  }
  int id = loss.node_on(*this);
  if (id < 0) {
    throw std::logic_error("Tape::backward: loss is not recorded on this tape");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be scalar, got " +
                                loss.shape_str());
  }
  grads_.assign(nodes_.size(), {});
  grads_[id] = {1.0};
  for (int i = id; i >= 0; --i) {
    if (!grads_[i].empty() && nodes_[i].backward) {
      nodes_[i].backward(*this, grads_[i]);
    }
  }
  backward_done_ = true;
}

std::vector<double> Tape::grad(const Tensor& t) const {
  if (!backward_done_) {
    throw std::logic_error("Tape::grad: backward() has not run");
  }
  int id = t.node_on(*this);
  if (id >= 0 && !grads_[id].empty()) return grads_[id];
  return std::vector<double>(t.size(), 0.0);
}

bool Tape::has_grad(const Tensor& t) const {
  int id = t.node_on(*this);
  return backward_done_ && id >= 0 && !grads_[static_cast<std::size_t>(id)].empty();
}

std::vector<double>& Tape::accum(int node_id) {
  auto& g = grads_[static_cast<std::size_t>(node_id)];
  if (g.empty()) g.resize(nodes_[static_cast<std::size_t>(node_id)].len, 0.0);
  return g;
}

// ------------------------------------------------------------ op helpers

namespace {

struct Rec {
  Tape* tape = nullptr;
  int pa = -1;
  int pb = -1;
  bool on() const { return tape != nullptr; }
};

Rec probe(const Tensor& a) {
  Rec r;
  Tape* tp = Tape::active();
  if (!tp) return r;
  int pa = a.node_on(*tp);
  if (pa >= 0) {
    r.tape = tp;
    r.pa = pa;
  }
  return r;
}

Rec probe(const Tensor& a, const Tensor& b) {
  Rec r;
  Tape* tp = Tape::active();
  if (!tp) return r;
  r.pa = a.node_on(*tp);
  r.pb = b.node_on(*tp);
  if (r.pa >= 0 || r.pb >= 0) r.tape = tp;
  return r;
}

void attach(Tensor& out, Tape* tape, int node) {
  out.requires_grad = true;
  out.tape_id = tape->id();
  out.node = node;
}

}  // namespace

// -------------------------------------------------------------- math ops

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape);
  kernels::ew_add(a.size(), a.ptr(), b.ptr(), out.ptr());
  if (Rec r = probe(a, b); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "add", {r.pa, r.pb}, n,
        [pa = r.pa, pb = r.pb, n](Tape& t, const std::vector<double>& g) {
          if (pa >= 0) kernels::ew_acc(n, g.data(), t.accum(pa).data());
          if (pb >= 0) kernels::ew_acc(n, g.data(), t.accum(pb).data());
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape);
  kernels::ew_sub(a.size(), a.ptr(), b.ptr(), out.ptr());
  if (Rec r = probe(a, b); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "sub", {r.pa, r.pb}, n,
        [pa = r.pa, pb = r.pb, n](Tape& t, const std::vector<double>& g) {
          if (pa >= 0) kernels::ew_acc(n, g.data(), t.accum(pa).data());
          if (pb >= 0) {
            auto& gb = t.accum(pb);
            for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape);
  kernels::ew_mul(a.size(), a.ptr(), b.ptr(), out.ptr());
  if (Rec r = probe(a, b); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "mul", {r.pa, r.pb}, n,
        [pa = r.pa, pb = r.pb, n, ad = a.data, bd = b.data](
            Tape& t, const std::vector<double>& g) {
          if (pa >= 0) kernels::ew_mul_acc(n, g.data(), bd->data(), t.accum(pa).data());
          if (pb >= 0) kernels::ew_mul_acc(n, g.data(), ad->data(), t.accum(pb).data());
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    dim_error("matmul", "expects rank-2 inputs, got " + a.shape_str() + " and " +
                            b.shape_str());
  }
  const int n = a.shape[0], k = a.shape[1], m = b.shape[1];
  if (b.shape[0] != k) {
    dim_error("matmul", "inner extents of " + a.shape_str() + " and " +
                            b.shape_str() + " differ");
  }
  Tensor out = Tensor::zeros({n, m});
  kernels::gemm(false, false, n, m, k, a.ptr(), b.ptr(), out.ptr(), false);
  if (Rec r = probe(a, b); r.on()) {
    int node = r.tape->record(
        "matmul", {r.pa, r.pb}, out.size(),
        [pa = r.pa, pb = r.pb, n, k, m, ad = a.data, bd = b.data](
            Tape& t, const std::vector<double>& g) {
          if (pa >= 0) {
            // dA = g * B^T
            kernels::gemm(false, true, n, k, m, g.data(), bd->data(),
                          t.accum(pa).data(), true);
          }
          if (pb >= 0) {
            // dB = A^T * g
            kernels::gemm(true, false, k, m, n, ad->data(), g.data(),
                          t.accum(pb).data(), true);
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) dim_error("transpose", "expects rank-2, got " + a.shape_str());
  const int n = a.shape[0], m = a.shape[1];
  Tensor out = Tensor::zeros({m, n});
  const double* src = a.ptr();
  double* dst = out.ptr();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) dst[j * n + i] = src[i * m + j];
  }
  if (Rec r = probe(a); r.on()) {
    int node = r.tape->record(
        "transpose", {r.pa}, out.size(),
        [pa = r.pa, n, m](Tape& t, const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) ga[i * m + j] += g[j * n + i];
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.size()) {
    dim_error("reshape", "cannot view " + a.shape_str() + " with " +
                             std::to_string(a.size()) + " elements as requested shape");
  }
  Tensor out;
  out.shape = std::move(shape);
  out.data = std::make_shared<std::vector<double>>(*a.data);
  if (Rec r = probe(a); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "reshape", {r.pa}, n,
        [pa = r.pa, n](Tape& t, const std::vector<double>& g) {
          kernels::ew_acc(n, g.data(), t.accum(pa).data());
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: empty part list");
  const Tensor& first = parts.front();
  std::vector<int> lead(first.shape.begin(), first.shape.end() - 1);
  int total_last = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.rank() ||
        !std::equal(lead.begin(), lead.end(), p.shape.begin())) {
      dim_error("concat_last", "leading extents of " + first.shape_str() +
                                   " and " + p.shape_str() + " differ");
    }
    total_last += last_extent(p);
  }
  std::vector<int> out_shape = lead;
  out_shape.push_back(total_last);
  Tensor out = Tensor::zeros(out_shape);
  const std::size_t rows = out.size() / static_cast<std::size_t>(total_last);

  int col = 0;
  for (const Tensor& p : parts) {
    const int w = last_extent(p);
    const double* src = p.ptr();
    double* dst = out.ptr();
    for (std::size_t row = 0; row < rows; ++row) {
      std::memcpy(dst + row * total_last + col, src + row * w, sizeof(double) * w);
    }
    col += w;
  }

  Tape* tp = Tape::active();
  bool any = false;
  std::vector<int> pids(parts.size(), -1);
  if (tp) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      pids[i] = parts[i].node_on(*tp);
      any = any || pids[i] >= 0;
    }
  }
  if (tp && any) {
    std::vector<int> widths(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) widths[i] = last_extent(parts[i]);
    int node = tp->record(
        "concat_last", pids, out.size(),
        [pids, widths, rows, total_last](Tape& t, const std::vector<double>& g) {
          int col = 0;
          for (std::size_t i = 0; i < pids.size(); ++i) {
            const int w = widths[i];
            if (pids[i] >= 0) {
              auto& gp = t.accum(pids[i]);
              for (std::size_t row = 0; row < rows; ++row) {
                for (int c = 0; c < w; ++c) {
                  gp[row * w + c] += g[row * total_last + col + c];
                }
              }
            }
            col += w;
          }
        });
    attach(out, tp, node);
  }
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty row list");
  const Tensor& first = rows.front();
  if (first.rank() > 2 || (first.rank() == 2 && first.shape[0] != 1)) {
    dim_error("stack_rows", "rows must be [w] or [1 x w], got " + first.shape_str());
  }
  const int w = last_extent(first);
  for (const Tensor& r : rows) {
    if (r.shape != first.shape) {
      dim_error("stack_rows", "row shapes " + first.shape_str() + " and " +
                                  r.shape_str() + " differ");
    }
  }
  const int T = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({T, w});
  for (int t = 0; t < T; ++t) {
    std::memcpy(out.ptr() + static_cast<std::size_t>(t) * w, rows[t].ptr(),
                sizeof(double) * w);
  }

  Tape* tp = Tape::active();
  bool any = false;
  std::vector<int> pids(rows.size(), -1);
  if (tp) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      pids[i] = rows[i].node_on(*tp);
      any = any || pids[i] >= 0;
    }
  }
  if (tp && any) {
    int node = tp->record(
        "stack_rows", pids, out.size(),
        [pids, w](Tape& t, const std::vector<double>& g) {
          for (std::size_t i = 0; i < pids.size(); ++i) {
            if (pids[i] < 0) continue;
            auto& gp = t.accum(pids[i]);
            const double* gs = g.data() + i * static_cast<std::size_t>(w);
            for (int c = 0; c < w; ++c) gp[c] += gs[c];
          }
        });
    attach(out, tp, node);
  }
  return out;
}

Tensor slice_last(const Tensor& a, int offset, int extent) {
  const int w = last_extent(a);
  if (offset < 0 || extent <= 0 || offset + extent > w) {
    dim_error("slice_last", "range [" + std::to_string(offset) + ", " +
                                std::to_string(offset + extent) + ") outside " +
                                a.shape_str());
  }
  std::vector<int> out_shape = a.shape;
  out_shape.back() = extent;
  Tensor out = Tensor::zeros(out_shape);
  const std::size_t rows = a.size() / static_cast<std::size_t>(w);
  for (std::size_t row = 0; row < rows; ++row) {
    std::memcpy(out.ptr() + row * extent, a.ptr() + row * w + offset,
                sizeof(double) * extent);
  }
  if (Rec r = probe(a); r.on()) {
    int node = r.tape->record(
        "slice_last", {r.pa}, out.size(),
        [pa = r.pa, rows, w, offset, extent](Tape& t, const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          for (std::size_t row = 0; row < rows; ++row) {
            for (int c = 0; c < extent; ++c) {
              ga[row * w + offset + c] += g[row * extent + c];
            }
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int offset, int extent) {
  if (a.rank() != 2) dim_error("slice_rows", "expects rank-2, got " + a.shape_str());
  const int n = a.shape[0], m = a.shape[1];
  if (offset < 0 || extent <= 0 || offset + extent > n) {
    dim_error("slice_rows", "range [" + std::to_string(offset) + ", " +
                                std::to_string(offset + extent) + ") outside " +
                                a.shape_str());
  }
  Tensor out = Tensor::zeros({extent, m});
  std::memcpy(out.ptr(), a.ptr() + static_cast<std::size_t>(offset) * m,
              sizeof(double) * out.size());
  if (Rec r = probe(a); r.on()) {
    int node = r.tape->record(
        "slice_rows", {r.pa}, out.size(),
        [pa = r.pa, m, offset, extent](Tape& t, const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          const std::size_t len = static_cast<std::size_t>(extent) * m;
          double* dst = ga.data() + static_cast<std::size_t>(offset) * m;
          for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor expand_rows(const Tensor& v, int n) {
  if (v.rank() != 1) dim_error("expand_rows", "expects rank-1, got " + v.shape_str());
  if (n <= 0) dim_error("expand_rows", "row count must be positive");
  const int w = v.shape[0];
  Tensor out = Tensor::zeros({n, w});
  for (int row = 0; row < n; ++row) {
    std::memcpy(out.ptr() + static_cast<std::size_t>(row) * w, v.ptr(),
                sizeof(double) * w);
  }
  if (Rec r = probe(v); r.on()) {
    int node = r.tape->record(
        "expand_rows", {r.pa}, out.size(),
        [pa = r.pa, n, w](Tape& t, const std::vector<double>& g) {
          auto& gv = t.accum(pa);
          for (int row = 0; row < n; ++row) {
            const double* gs = g.data() + static_cast<std::size_t>(row) * w;
            for (int c = 0; c < w; ++c) gv[c] += gs[c];
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor gather_rows(const Tensor& m, const std::vector<int>& ids) {
  if (m.rank() != 2) dim_error("gather_rows", "expects rank-2, got " + m.shape_str());
  const int rows = m.shape[0], w = m.shape[1];
  for (int id : ids) {
    if (id < 0 || id >= rows) {
      throw std::out_of_range("gather_rows: row id " + std::to_string(id) +
                              " outside " + m.shape_str());
    }
  }
  const int T = static_cast<int>(ids.size());
  if (T == 0) throw std::invalid_argument("gather_rows: empty id list");
  Tensor out = Tensor::zeros({T, w});
  for (int t = 0; t < T; ++t) {
    std::memcpy(out.ptr() + static_cast<std::size_t>(t) * w,
                m.ptr() + static_cast<std::size_t>(ids[t]) * w, sizeof(double) * w);
  }
  if (Rec r = probe(m); r.on()) {
    int node = r.tape->record(
        "gather_rows", {r.pa}, out.size(),
        [pa = r.pa, ids, w](Tape& t, const std::vector<double>& g) {
          auto& gm = t.accum(pa);
          for (std::size_t i = 0; i < ids.size(); ++i) {
            double* dst = gm.data() + static_cast<std::size_t>(ids[i]) * w;
            const double* src = g.data() + i * static_cast<std::size_t>(w);
            for (int c = 0; c < w; ++c) dst[c] += src[c];
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

namespace {

template <typename Fwd, typename BwdAcc>
Tensor unary_map(const char* kind, const Tensor& a, Fwd fwd, BwdAcc bwd,
                 bool save_input) {
  Tensor out = Tensor::zeros(a.shape);
  fwd(a.size(), a.ptr(), out.ptr());
  if (Rec r = probe(a); r.on()) {
    auto saved = save_input ? a.data : out.data;
    const std::size_t n = out.size();
    int node = r.tape->record(
        kind, {r.pa}, n,
        [pa = r.pa, n, saved, bwd](Tape& t, const std::vector<double>& g) {
          bwd(n, g.data(), saved->data(), t.accum(pa).data());
        });
    attach(out, r.tape, node);
  }
  return out;
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
  return unary_map("sigmoid", a, kernels::map_sigmoid, kernels::sigmoid_bwd_acc,
                   false);
}

Tensor tanh(const Tensor& a) {
  return unary_map("tanh", a, kernels::map_tanh, kernels::tanh_bwd_acc, false);
}

Tensor relu(const Tensor& a) {
  return unary_map("relu", a, kernels::map_relu, kernels::relu_bwd_acc, true);
}

Tensor softmax_masked(const Tensor& a, const std::vector<std::uint8_t>& mask) {
  if (a.rank() != 2) {
    dim_error("softmax_masked", "expects rank-2, got " + a.shape_str());
  }
  if (mask.size() != a.size()) {
    dim_error("softmax_masked", "mask length " + std::to_string(mask.size()) +
                                    " does not match " + a.shape_str());
  }
  const int rows = a.shape[0], cols = a.shape[1];
  Tensor out = Tensor::zeros(a.shape);
  const double* x = a.ptr();
  double* y = out.ptr();
  for (int i = 0; i < rows; ++i) {
    const std::uint8_t* mrow = mask.data() + static_cast<std::size_t>(i) * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < cols; ++j) {
      if (mrow[j] && x[i * cols + j] > mx) mx = x[i * cols + j];
    }
    if (!std::isfinite(mx)) {
      throw std::invalid_argument("softmax_masked: row " + std::to_string(i) +
                                  " is fully masked");
    }
    double z = 0.0;
    for (int j = 0; j < cols; ++j) {
      if (mrow[j]) {
        const double e = std::exp(x[i * cols + j] - mx);
        y[i * cols + j] = e;
        z += e;
      }
    }
    for (int j = 0; j < cols; ++j) {
      if (mrow[j]) y[i * cols + j] /= z;
    }
  }
  if (Rec r = probe(a); r.on()) {
    int node = r.tape->record(
        "softmax_masked", {r.pa}, out.size(),
        [pa = r.pa, rows, cols, mask, yd = out.data](Tape& t,
                                                     const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          const double* y = yd->data();
          for (int i = 0; i < rows; ++i) {
            const std::uint8_t* mrow = mask.data() + static_cast<std::size_t>(i) * cols;
            double dot = 0.0;
            for (int j = 0; j < cols; ++j) {
              if (mrow[j]) dot += g[i * cols + j] * y[i * cols + j];
            }
            for (int j = 0; j < cols; ++j) {
              if (mrow[j]) {
                ga[i * cols + j] += y[i * cols + j] * (g[i * cols + j] - dot);
              }
            }
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor max_over_time(const Tensor& a, const std::vector<std::uint8_t>& mask) {
  if (a.rank() != 2) {
    dim_error("max_over_time", "expects rank-2 [T x d], got " + a.shape_str());
  }
  const int T = a.shape[0], d = a.shape[1];
  if (mask.size() != static_cast<std::size_t>(T)) {
    dim_error("max_over_time", "mask length " + std::to_string(mask.size()) +
                                   " does not match T=" + std::to_string(T));
  }
  bool any = false;
  for (std::uint8_t m : mask) any = any || m;
  if (!any) throw std::invalid_argument("max_over_time: all steps masked");

  Tensor out = Tensor::zeros({d});
  auto argmax = std::make_shared<std::vector<int>>(d, -1);
  const double* x = a.ptr();
  for (int j = 0; j < d; ++j) {
    double best = 0.0;
    int at = -1;
    for (int t = 0; t < T; ++t) {
      if (!mask[t]) continue;
      const double v = x[t * d + j];
      if (at < 0 || v > best) {  // ties keep the earliest step
        best = v;
        at = t;
      }
    }
    out.ptr()[j] = best;
    (*argmax)[j] = at;
  }
  if (Rec r = probe(a); r.on()) {
    int node = r.tape->record(
        "max_over_time", {r.pa}, out.size(),
        [pa = r.pa, d, argmax](Tape& t, const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          for (int j = 0; j < d; ++j) ga[(*argmax)[j] * d + j] += g[j];
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor dropout(const Tensor& a, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " +
                                std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;

  const double keep_scale = 1.0 / (1.0 - rate);
  auto mult = std::make_shared<std::vector<double>>(a.size());
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (double& m : *mult) m = dist(rng) < rate ? 0.0 : keep_scale;

  Tensor out = Tensor::zeros(a.shape);
  kernels::ew_mul(a.size(), a.ptr(), mult->data(), out.ptr());
  if (Rec r = probe(a); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "dropout", {r.pa}, n,
        [pa = r.pa, n, mult](Tape& t, const std::vector<double>& g) {
          kernels::ew_mul_acc(n, g.data(), mult->data(), t.accum(pa).data());
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor pick(const Tensor& a, std::size_t index) {
  if (index >= a.size()) {
    throw std::out_of_range("pick: index " + std::to_string(index) + " outside " +
                            a.shape_str());
  }
  Tensor out = Tensor::scalar(a.at(index));
  if (Rec r = probe(a); r.on()) {
    int node = r.tape->record(
        "pick", {r.pa}, 1,
        [pa = r.pa, index](Tape& t, const std::vector<double>& g) {
          t.accum(pa)[index] += g[0];
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a.at(i);
  Tensor out = Tensor::scalar(total);
  if (Rec r = probe(a); r.on()) {
    const std::size_t n = a.size();
    int node = r.tape->record(
        "sum", {r.pa}, 1,
        [pa = r.pa, n](Tape& t, const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out.ptr()[i] = c * a.at(i);
  if (Rec r = probe(a); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "scale", {r.pa}, n,
        [pa = r.pa, n, c](Tape& t, const std::vector<double>& g) {
          auto& ga = t.accum(pa);
          for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) {
    dim_error("scale_by", "scale must be a scalar [1], got " + s.shape_str());
  }
  const double c = s.at(0);
  Tensor out = Tensor::zeros(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out.ptr()[i] = c * a.at(i);
  if (Rec r = probe(a, s); r.on()) {
    const std::size_t n = out.size();
    int node = r.tape->record(
        "scale_by", {r.pa, r.pb}, n,
        [pa = r.pa, ps = r.pb, n, c, ad = a.data](Tape& t,
                                                  const std::vector<double>& g) {
          if (pa >= 0) {
            auto& ga = t.accum(pa);
            for (std::size_t i = 0; i < n; ++i) ga[i] += c * g[i];
          }
          if (ps >= 0) {
            double dot = 0.0;
            const double* av = ad->data();
            for (std::size_t i = 0; i < n; ++i) dot += av[i] * g[i];
            t.accum(ps)[0] += dot;
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

Tensor nll_mean(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.rank() != 2 || probs.shape[1] != 2) {
    dim_error("nll_mean", "expects [B x 2] probabilities, got " + probs.shape_str());
  }
  const int B = probs.shape[0];
  if (labels.size() != static_cast<std::size_t>(B)) {
    dim_error("nll_mean", "label count " + std::to_string(labels.size()) +
                              " does not match batch " + std::to_string(B));
  }
  constexpr double kFloor = 1e-12;
  double total = 0.0;
  for (int i = 0; i < B; ++i) {
    const int y = labels[i];
    if (y != 0 && y != 1) {
      throw std::invalid_argument("nll_mean: label " + std::to_string(y) +
                                  " outside {0,1} at row " + std::to_string(i));
    }
    total += -std::log(std::max(probs.at(i * 2 + y), kFloor));
  }
  Tensor out = Tensor::scalar(total / B);
  if (Rec r = probe(probs); r.on()) {
    int node = r.tape->record(
        "nll_mean", {r.pa}, 1,
        [pa = r.pa, B, labels, pd = probs.data](Tape& t,
                                                const std::vector<double>& g) {
          auto& gp = t.accum(pa);
          for (int i = 0; i < B; ++i) {
            const double p = (*pd)[i * 2 + labels[i]];
            if (p > kFloor) gp[i * 2 + labels[i]] += g[0] * (-1.0 / p) / B;
          }
        });
    attach(out, r.tape, node);
  }
  return out;
}

// --------------------------------------------------------- grad checking

GradCheckReport grad_check(const std::function<Tensor(Tensor&)>& f,
                           const Tensor& at, double h, double tol) {
  Tensor x = at.clone();
  x.requires_grad = true;

  std::vector<double> analytic;
  {
    Tape tape;
    tape.watch(x);
    Tensor loss = f(x);
    if (loss.size() != 1) {
      throw std::invalid_argument("grad_check: f must be scalar-valued");
    }
    tape.backward(loss);
    analytic = tape.grad(x);
  }

  GradCheckReport report;
  report.checked = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.at(i);
    x.at(i) = orig + h;
    const double fp = f(x).at(0);
    x.at(i) = orig - h;
    const double fm = f(x).at(0);
    x.at(i) = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({1e-6, std::fabs(analytic[i]), std::fabs(numeric)});
    const double rel = std::fabs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = {i, analytic[i], numeric, rel};
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace amr
