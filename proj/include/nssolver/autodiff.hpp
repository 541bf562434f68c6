#pragma once

#include "nssolver/common.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace nss::ad {

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AutodiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A trainable matrix. Parameters live in a ParameterStore and keep their
// position there; gradients are accumulated externally in GradBuffers so
// evaluation can run on several tapes at once.
struct Parameter {
  std::string name;
  Mat value;
  int index = -1;
  int group = 0;
};

class ParameterStore {
 public:
  Parameter& add(const std::string& name, int rows, int cols, int group = 0);
  int size() const { return static_cast<int>(params_.size()); }
  Parameter& at(int i) { return *params_[i]; }
  const Parameter& at(int i) const { return *params_[i]; }
  Parameter* find(const std::string& name);
  std::int64_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, int> by_name_;
};

void init_xavier_uniform(Parameter& p, Rng& rng);
void init_zero(Parameter& p);

// per-parameter gradient accumulator aligned with a ParameterStore
class GradBuffer {
 public:
  explicit GradBuffer(const ParameterStore& store);
  Mat& at(int i) { return grads_[i]; }
  const Mat& at(int i) const { return grads_[i]; }
  int size() const { return static_cast<int>(grads_.size()); }
  void set_zero();
  void accumulate(const GradBuffer& other);

 private:
  std::vector<Mat> grads_;
};

class Tape;

// handle to a tape node
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr; }
  const Mat& value() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

// Reverse-mode differentiation tape. Single-threaded; one backward pass per
// tape, after which the tape is cleared. Distinct tapes may run in parallel
// over a shared read-only ParameterStore.
class Tape {
 public:
  explicit Tape(std::uint64_t seed = 0, bool grad_enabled = true)
      : rng_(seed), grad_enabled_(grad_enabled) {}

  Var param(const Parameter& p);
  Var constant(Mat v);
  Var scalar(double v);

  bool grad_enabled() const { return grad_enabled_; }
  Rng& rng() { return rng_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Propagates from a 1x1 loss node, accumulating parameter gradients into
  // the buffer, then clears the tape.
  void backward(Var loss, GradBuffer& out);
  void clear();

  // internal-use surface for the op library
  struct Node {
    Mat value;
    Mat grad;
    bool has_grad = false;
    bool requires_grad = false;
    int param_index = -1;
    std::function<void(Tape&, const Mat&)> back;
  };
  const Mat& value_of(int id) const { return nodes_[id].value; }
  bool node_requires_grad(int id) const { return nodes_[id].requires_grad; }
  Mat& grad_of(int id);  // allocates zeros on first touch
  int push(Mat value, bool requires_grad,
           std::function<void(Tape&, const Mat&)> back);
  void set_back(int id, std::function<void(Tape&, const Mat&)> back);

  // Weight gradients of matmuls are rank-k updates; queuing them per target
  // and flushing as a single product keeps the backward pass from streaming
  // the big matrices once per use.
  void defer_outer(int target, const Mat& g, const Mat& x);

 private:
  void flush_outer(int id);

  struct PendingOuter {
    const Mat* g;
    const Mat* x;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  std::unordered_map<int, std::vector<PendingOuter>> pending_outer_;
  Rng rng_;
  bool grad_enabled_;
  bool consumed_ = false;
};

// ---- forward ops ----

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var square(Var a);
Var transpose(Var a);
Var add_colvec(Var m, Var v);  // broadcast a column vector over columns
Var vconcat(Var a, Var b);
Var concat_cols(const std::vector<Var>& cols);
Var block(Var a, int r0, int c0, int rows, int cols);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var softmax(Var a);  // over all entries of a vector-shaped input
Var masked_softmax(Var a, const std::vector<std::uint8_t>& mask);
Var log_softmax(Var a);
Var embedding_lookup(Var table, const std::vector<int>& ids);  // dim x n
Var mean_all(Var a);
Var sum_all(Var a);
Var dropout(Var a, double p, bool train);
Var log_clamped(Var a, double lo = 1e-12, double hi = 1.0 - 1e-12);
Var binary_cross_entropy(Var probs, const Mat& targets);
Var categorical_cross_entropy(Var log_probs, int target);

}  // namespace nss::ad
