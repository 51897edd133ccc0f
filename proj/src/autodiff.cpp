#include "vnla/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace vnla::ad {

int ParamStore::add(std::string name, int rows, int cols) {
  Block b;
  b.name = std::move(name);
  b.rows = rows;
  b.cols = cols;
  b.w.assign(static_cast<std::size_t>(rows * cols), 0.0);
  blocks_.push_back(std::move(b));
  return static_cast<int>(blocks_.size()) - 1;
}

int ParamStore::total_params() const {
  int total = 0;
  for (const auto& b : blocks_) total += b.size();
  return total;
}

void ParamStore::init(Rng& rng) {
  for (auto& b : blocks_) {
    if (b.cols <= 1) {
      std::fill(b.w.begin(), b.w.end(), 0.0);
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
    for (auto& w : b.w) w = rng.uniform(-bound, bound);
  }
}

void GradBuffer::init(const ParamStore& params) {
  grads_.resize(static_cast<std::size_t>(params.count()));
  for (int i = 0; i < params.count(); ++i) {
    grads_[static_cast<std::size_t>(i)].assign(
        static_cast<std::size_t>(params.block(i).size()), 0.0);
  }
}

void GradBuffer::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
  assert(grads_.size() == other.grads_.size());
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    auto& dst = grads_[i];
    const auto& src = other.grads_[i];
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void Tape::reset() {
  nodes_.clear();
  vals_.clear();
  aux_.clear();
}

Tape::Var Tape::push(Op op, int len, int a, int b) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.off = static_cast<int>(vals_.size());
  n.len = len;
  vals_.resize(vals_.size() + static_cast<std::size_t>(len), 0.0);
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v)];
  return {vals_.data() + n.off, static_cast<std::size_t>(n.len)};
}

Tape::Var Tape::input(std::span<const double> v) {
  const Var out = push(Op::input, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), val(out));
  return out;
}

Tape::Var Tape::zeros(int len) { return push(Op::input, len); }

Tape::Var Tape::param(int block) {
  const Block& b = params_.block(block);
  if (b.cols != 1) throw std::logic_error("param(): block is a matrix: " + b.name);
  const Var out = push(Op::param, b.rows);
  nodes_.back().block = block;
  std::copy(b.w.begin(), b.w.end(), val(out));
  return out;
}

Tape::Var Tape::param_row(int block, int row) {
  const Block& b = params_.block(block);
  if (row < 0 || row >= b.rows) throw std::out_of_range("param_row: bad row in " + b.name);
  const Var out = push(Op::param_row, b.cols);
  nodes_.back().block = block;
  nodes_.back().index = row;
  const double* src = b.w.data() + static_cast<std::size_t>(row) * b.cols;
  std::copy(src, src + b.cols, val(out));
  return out;
}

Tape::Var Tape::matvec(int block, Var x) {
  const Block& b = params_.block(block);
  if (size(x) != b.cols) throw std::logic_error("matvec: dimension mismatch with " + b.name);
  const Var out = push(Op::matvec, b.rows, x);
  nodes_.back().block = block;
  const double* __restrict xv = val(x);
  double* __restrict y = val(out);
  for (int i = 0; i < b.rows; ++i) {
    const double* __restrict row = b.w.data() + static_cast<std::size_t>(i) * b.cols;
    double acc = 0.0;
    for (int j = 0; j < b.cols; ++j) acc += row[j] * xv[j];
    y[i] = acc;
  }
  return out;
}

Tape::Var Tape::matvec_t(int block, Var x) {
  const Block& b = params_.block(block);
  if (size(x) != b.rows) throw std::logic_error("matvec_t: dimension mismatch with " + b.name);
  const Var out = push(Op::matvec_t, b.cols, x);
  nodes_.back().block = block;
  const double* xv = val(x);
  double* y = val(out);
  std::fill(y, y + b.cols, 0.0);
  for (int i = 0; i < b.rows; ++i) {
    const double* row = b.w.data() + static_cast<std::size_t>(i) * b.cols;
    const double xi = xv[i];
    for (int j = 0; j < b.cols; ++j) y[j] += row[j] * xi;
  }
  return out;
}

Tape::Var Tape::add(Var a, Var b) {
  if (size(a) != size(b)) throw std::logic_error("add: size mismatch");
  const Var out = push(Op::add, size(a), a, b);
  const double* av = val(a);
  const double* bv = val(b);
  double* y = val(out);
  for (int i = 0; i < size(a); ++i) y[i] = av[i] + bv[i];
  return out;
}

Tape::Var Tape::mul(Var a, Var b) {
  if (size(a) != size(b)) throw std::logic_error("mul: size mismatch");
  const Var out = push(Op::mul, size(a), a, b);
  const double* av = val(a);
  const double* bv = val(b);
  double* y = val(out);
  for (int i = 0; i < size(a); ++i) y[i] = av[i] * bv[i];
  return out;
}

Tape::Var Tape::sigmoid(Var a) {
  const Var out = push(Op::sigmoid, size(a), a);
  const double* av = val(a);
  double* y = val(out);
  for (int i = 0; i < size(a); ++i) y[i] = 1.0 / (1.0 + std::exp(-av[i]));
  return out;
}

Tape::Var Tape::tanh(Var a) {
  const Var out = push(Op::tanh_, size(a), a);
  const double* av = val(a);
  double* y = val(out);
  for (int i = 0; i < size(a); ++i) y[i] = std::tanh(av[i]);
  return out;
}

Tape::Var Tape::relu(Var a) {
  const Var out = push(Op::relu, size(a), a);
  const double* av = val(a);
  double* y = val(out);
  for (int i = 0; i < size(a); ++i) y[i] = av[i] > 0.0 ? av[i] : 0.0;
  return out;
}

Tape::Var Tape::softmax(Var a) {
  const Var out = push(Op::softmax, size(a), a);
  const double* av = val(a);
  double* y = val(out);
  double mx = av[0];
  for (int i = 1; i < size(a); ++i) mx = std::max(mx, av[i]);
  double total = 0.0;
  for (int i = 0; i < size(a); ++i) {
    y[i] = std::exp(av[i] - mx);
    total += y[i];
  }
  for (int i = 0; i < size(a); ++i) y[i] /= total;
  return out;
}

Tape::Var Tape::concat(std::span<const Var> parts) {
  int len = 0;
  for (Var p : parts) len += size(p);
  const Var out = push(Op::concat, len);
  Node& n = nodes_.back();
  n.aux_begin = static_cast<int>(aux_.size());
  n.aux_count = static_cast<int>(parts.size());
  for (Var p : parts) aux_.push_back(p);
  double* y = val(out);
  for (Var p : parts) {
    const double* pv = val(p);
    y = std::copy(pv, pv + size(p), y);
  }
  return out;
}

Tape::Var Tape::slice(Var a, int offset, int len) {
  if (offset < 0 || offset + len > size(a)) throw std::out_of_range("slice: bad range");
  const Var out = push(Op::slice, len, a);
  nodes_.back().index = offset;
  const double* av = val(a) + offset;
  std::copy(av, av + len, val(out));
  return out;
}

Tape::Var Tape::dot(Var a, Var b) {
  if (size(a) != size(b)) throw std::logic_error("dot: size mismatch");
  const Var out = push(Op::dot, 1, a, b);
  const double* av = val(a);
  const double* bv = val(b);
  double acc = 0.0;
  for (int i = 0; i < size(a); ++i) acc += av[i] * bv[i];
  val(out)[0] = acc;
  return out;
}

Tape::Var Tape::pick(Var a, int index) {
  if (index < 0 || index >= size(a)) throw std::out_of_range("pick: bad index");
  const Var out = push(Op::pick, 1, a);
  nodes_.back().index = index;
  val(out)[0] = val(a)[index];
  return out;
}

Tape::Var Tape::pack(std::span<const Var> scalars) {
  const Var out = push(Op::pack, static_cast<int>(scalars.size()));
  Node& n = nodes_.back();
  n.aux_begin = static_cast<int>(aux_.size());
  n.aux_count = static_cast<int>(scalars.size());
  for (Var s : scalars) aux_.push_back(s);
  double* y = val(out);
  for (std::size_t i = 0; i < scalars.size(); ++i) y[i] = val(scalars[i])[0];
  return out;
}

Tape::Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
  if (size(weights) != static_cast<int>(vectors.size())) {
    throw std::logic_error("weighted_sum: weight/vector count mismatch");
  }
  const int len = size(vectors[0]);
  const Var out = push(Op::weighted_sum, len, weights);
  Node& n = nodes_.back();
  n.aux_begin = static_cast<int>(aux_.size());
  n.aux_count = static_cast<int>(vectors.size());
  for (Var v : vectors) aux_.push_back(v);
  const double* wv = val(weights);
  double* y = val(out);
  std::fill(y, y + len, 0.0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double* mv = val(vectors[i]);
    for (int j = 0; j < len; ++j) y[j] += wv[i] * mv[j];
  }
  return out;
}

Tape::Var Tape::sum(Var a) {
  const Var out = push(Op::sum, 1, a);
  const double* av = val(a);
  double acc = 0.0;
  for (int i = 0; i < size(a); ++i) acc += av[i];
  val(out)[0] = acc;
  return out;
}

Tape::Var Tape::nll(Var dist, int label) {
  if (label < 0 || label >= size(dist)) throw std::out_of_range("nll: bad label");
  const Var out = push(Op::nll, 1, dist);
  nodes_.back().index = label;
  val(out)[0] = -std::log(std::max(val(dist)[label], kProbFloor));
  return out;
}

Tape::Var Tape::detach(Var a) { return input(value(a)); }

void Tape::backward(Var loss) {
  if (grads_ == nullptr) throw std::logic_error("backward: tape has no gradient buffer");
  if (size(loss) != 1) throw std::logic_error("backward: loss must be scalar");
  grads_arena_.assign(vals_.size(), 0.0);
  grd(loss)[0] = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const double* dy = grads_arena_.data() + n.off;
    switch (n.op) {
      case Op::input:
        break;
      case Op::param: {
        auto& g = grads_->grad(n.block);
        for (int i = 0; i < n.len; ++i) g[static_cast<std::size_t>(i)] += dy[i];
        break;
      }
      case Op::param_row: {
        auto& g = grads_->grad(n.block);
        double* row = g.data() + static_cast<std::size_t>(n.index) * n.len;
        for (int i = 0; i < n.len; ++i) row[i] += dy[i];
        break;
      }
      case Op::matvec: {
        const Block& b = params_.block(n.block);
        auto& gw = grads_->grad(n.block);
        const double* __restrict xv = val(n.a);
        double* __restrict dx = grd(n.a);
        for (int i = 0; i < b.rows; ++i) {
          const double d = dy[i];
          if (d == 0.0) continue;
          const double* __restrict row = b.w.data() + static_cast<std::size_t>(i) * b.cols;
          double* __restrict grow = gw.data() + static_cast<std::size_t>(i) * b.cols;
          for (int j = 0; j < b.cols; ++j) {
            grow[j] += d * xv[j];
            dx[j] += d * row[j];
          }
        }
        break;
      }
      case Op::matvec_t: {
        const Block& b = params_.block(n.block);
        auto& gw = grads_->grad(n.block);
        const double* xv = val(n.a);
        double* dx = grd(n.a);
        for (int i = 0; i < b.rows; ++i) {
          const double* row = b.w.data() + static_cast<std::size_t>(i) * b.cols;
          double* grow = gw.data() + static_cast<std::size_t>(i) * b.cols;
          const double xi = xv[i];
          double acc = 0.0;
          for (int j = 0; j < b.cols; ++j) {
            grow[j] += xi * dy[j];
            acc += row[j] * dy[j];
          }
          dx[i] += acc;
        }
        break;
      }
      case Op::add: {
        double* da = grd(n.a);
        double* db = grd(n.b);
        for (int i = 0; i < n.len; ++i) {
          da[i] += dy[i];
          db[i] += dy[i];
        }
        break;
      }
      case Op::mul: {
        const double* av = val(n.a);
        const double* bv = val(n.b);
        double* da = grd(n.a);
        double* db = grd(n.b);
        for (int i = 0; i < n.len; ++i) {
          da[i] += dy[i] * bv[i];
          db[i] += dy[i] * av[i];
        }
        break;
      }
      case Op::sigmoid: {
        const double* y = val(id);
        double* da = grd(n.a);
        for (int i = 0; i < n.len; ++i) da[i] += dy[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::tanh_: {
        const double* y = val(id);
        double* da = grd(n.a);
        for (int i = 0; i < n.len; ++i) da[i] += dy[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::relu: {
        const double* y = val(id);
        double* da = grd(n.a);
        for (int i = 0; i < n.len; ++i) {
          if (y[i] > 0.0) da[i] += dy[i];
        }
        break;
      }
      case Op::softmax: {
        const double* y = val(id);
        double* da = grd(n.a);
        double inner = 0.0;
        for (int i = 0; i < n.len; ++i) inner += y[i] * dy[i];
        for (int i = 0; i < n.len; ++i) da[i] += y[i] * (dy[i] - inner);
        break;
      }
      case Op::concat: {
        int off = 0;
        for (int k = 0; k < n.aux_count; ++k) {
          const Var part = aux_[static_cast<std::size_t>(n.aux_begin + k)];
          double* dp = grd(part);
          const int plen = size(part);
          for (int i = 0; i < plen; ++i) dp[i] += dy[off + i];
          off += plen;
        }
        break;
      }
      case Op::slice: {
        double* da = grd(n.a) + n.index;
        for (int i = 0; i < n.len; ++i) da[i] += dy[i];
        break;
      }
      case Op::dot: {
        const double* av = val(n.a);
        const double* bv = val(n.b);
        double* da = grd(n.a);
        double* db = grd(n.b);
        const double d = dy[0];
        for (int i = 0; i < size(n.a); ++i) {
          da[i] += d * bv[i];
          db[i] += d * av[i];
        }
        break;
      }
      case Op::pick:
        grd(n.a)[n.index] += dy[0];
        break;
      case Op::pack: {
        for (int k = 0; k < n.aux_count; ++k) {
          grd(aux_[static_cast<std::size_t>(n.aux_begin + k)])[0] += dy[k];
        }
        break;
      }
      case Op::weighted_sum: {
        const double* wv = val(n.a);
        double* dw = grd(n.a);
        for (int k = 0; k < n.aux_count; ++k) {
          const Var v = aux_[static_cast<std::size_t>(n.aux_begin + k)];
          const double* mv = val(v);
          double* dm = grd(v);
          double acc = 0.0;
          for (int j = 0; j < n.len; ++j) {
            acc += dy[j] * mv[j];
            dm[j] += wv[k] * dy[j];
          }
          dw[k] += acc;
        }
        break;
      }
      case Op::sum: {
        double* da = grd(n.a);
        const double d = dy[0];
        for (int i = 0; i < size(n.a); ++i) da[i] += d;
        break;
      }
      case Op::nll: {
        const double p = val(n.a)[n.index];
        if (p > kProbFloor) grd(n.a)[n.index] -= dy[0] / p;
        break;
      }
    }
  }
}

}  // namespace vnla::ad
