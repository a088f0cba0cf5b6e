#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace motionseg {

class Tape;

// Dense row-major tensor of doubles. Copies share the underlying buffer;
// no op mutates its inputs, so sharing is safe. A tensor is "tracked" when
// it was produced by an op on a Tape or registered via Tape::watch.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<size_t>(axis)); }
  long long size() const;
  double* data() { return data_ ? data_->data() : nullptr; }
  const double* data() const { return data_ ? data_->data() : nullptr; }
  double value() const;  // requires size() == 1
  bool defined() const { return static_cast<bool>(data_); }

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

  // Same buffer, detached from any tape.
  Tensor detached() const;
  // Deep copy, detached.
  Tensor clone() const;

 private:
  friend class Tape;
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

long long shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Reverse-mode tape. Nodes are recorded in creation order, which is a valid
// topological order of the graph (every parent precedes its child).
// backward() may be called exactly once per tape.
class Tape {
 public:
  using BackwardFn = std::function<void(const double* out_grad, Tape& tape)>;

  // Registers a leaf whose gradient will be accumulated during backward.
  // Watching the same buffer again returns the previously created node.
  Tensor watch(const Tensor& storage);

  // Marks `result` as produced on this tape. `parents` holds the node ids of
  // the tracked operands; untracked operands are simply not listed.
  Tensor adopt(Tensor result, std::vector<int> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse creation order,
  // visiting each node at most once. Rejects non-scalar losses and reuse.
  void backward(const Tensor& loss);

  // Gradient of a tracked tensor, valid after backward(). Zeros if the
  // tensor did not influence the loss.
  Tensor grad(const Tensor& tracked) const;
  // Gradient looked up by storage buffer (for watched leaves). Zeros of the
  // storage shape if the leaf was never watched or never reached.
  Tensor grad_for(const Tensor& storage) const;

  double* grad_buffer(int node);  // lazily allocated accumulation target
  bool has_grad(int node) const;

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
    long long size = 0;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::unordered_map<const void*, int> watched_;
  bool consumed_ = false;
};

}  // namespace motionseg
