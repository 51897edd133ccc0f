#pragma once

#include <span>
#include <string>
#include <vector>

#include "vnla/rng.hpp"

namespace vnla::ad {

// Named parameter block: a rows x cols matrix, or a vector when cols == 1.
struct Block {
  std::string name;
  int rows = 0, cols = 1;
  std::vector<double> w;
  int size() const { return rows * cols; }
};

class ParamStore {
 public:
  int add(std::string name, int rows, int cols = 1);
  Block& block(int id) { return blocks_[static_cast<std::size_t>(id)]; }
  const Block& block(int id) const { return blocks_[static_cast<std::size_t>(id)]; }
  int count() const { return static_cast<int>(blocks_.size()); }
  int total_params() const;

  // Matrix blocks: uniform in +-1/sqrt(cols); vector blocks start at zero.
  void init(Rng& rng);

 private:
  std::vector<Block> blocks_;
};

// Per-worker gradient accumulator matching a ParamStore's shapes.
class GradBuffer {
 public:
  void init(const ParamStore& params);
  void zero();
  void add(const GradBuffer& other);  // this += other
  std::vector<double>& grad(int id) { return grads_[static_cast<std::size_t>(id)]; }
  const std::vector<double>& grad(int id) const { return grads_[static_cast<std::size_t>(id)]; }
  int count() const { return static_cast<int>(grads_.size()); }

 private:
  std::vector<std::vector<double>> grads_;
};

// Reverse-mode tape over double vectors, scoped to exactly the operations the
// two policy networks need. Parameters are read from a shared immutable
// ParamStore; backward() accumulates into a caller-owned GradBuffer, so
// forward passes on shared params can run in parallel across episodes.
class Tape {
 public:
  using Var = int;

  explicit Tape(const ParamStore& params, GradBuffer* grads = nullptr)
      : params_(params), grads_(grads) {}

  void reset();
  void reset(GradBuffer* grads) {
    reset();
    grads_ = grads;
  }

  Var input(std::span<const double> v);
  Var input(std::initializer_list<double> v) { return input(std::span<const double>(v.begin(), v.size())); }
  Var scalar_input(double v) { return input({v}); }
  Var zeros(int len);

  Var param(int block);                // whole vector block (cols == 1)
  Var param_row(int block, int row);   // one row of a matrix block
  Var matvec(int block, Var x);        // W x
  Var matvec_t(int block, Var x);      // W' x

  Var add(Var a, Var b);
  Var mul(Var a, Var b);               // elementwise
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var softmax(Var a);
  Var concat(std::span<const Var> parts);
  Var slice(Var a, int offset, int len);
  Var dot(Var a, Var b);               // scalar
  Var pick(Var a, int index);          // scalar a[index]
  Var pack(std::span<const Var> scalars);
  Var weighted_sum(Var weights, std::span<const Var> vectors);  // sum_i w[i] * v_i
  Var sum(Var a);                      // scalar
  Var nll(Var dist, int label);        // -log(max(dist[label], 1e-12))
  Var detach(Var a);                   // value copy, no gradient edge

  int size(Var v) const { return nodes_[static_cast<std::size_t>(v)].len; }
  std::span<const double> value(Var v) const;
  double scalar(Var v) const { return value(v)[0]; }

  void backward(Var loss);  // seeds d(loss)=1; requires a GradBuffer

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    input, param, param_row, matvec, matvec_t, add, mul, sigmoid, tanh_, relu,
    softmax, concat, slice, dot, pick, pack, weighted_sum, sum, nll
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    int block = -1;
    int index = 0;          // row / slice offset / label
    int aux_begin = 0, aux_count = 0;
    int off = 0, len = 0;   // value arena slot
  };

  Var push(Op op, int len, int a = -1, int b = -1);
  double* val(int node) { return vals_.data() + nodes_[static_cast<std::size_t>(node)].off; }
  const double* val(int node) const { return vals_.data() + nodes_[static_cast<std::size_t>(node)].off; }
  double* grd(int node) { return grads_arena_.data() + nodes_[static_cast<std::size_t>(node)].off; }

  const ParamStore& params_;
  GradBuffer* grads_;
  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> grads_arena_;
  std::vector<int> aux_;
};

constexpr double kProbFloor = 1e-12;

}  // namespace vnla::ad
