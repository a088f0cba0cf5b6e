#include "motionseg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace motionseg {

long long shape_size(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extent must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(static_cast<size_t>(shape_size(shape_)), 0.0)) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (static_cast<long long>(values.size()) != shape_size(shape_)) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape_));
  }
  data_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : *t.data_) v = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

long long Tensor::size() const { return data_ ? static_cast<long long>(data_->size()) : 0; }

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("value() requires a single-element tensor, got " + shape_str(shape_));
  return (*data_)[0];
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = data_;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  if (data_) t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

Tensor Tape::watch(const Tensor& storage) {
  if (!storage.defined()) throw std::invalid_argument("cannot watch an undefined tensor");
  auto it = watched_.find(storage.data());
  if (it != watched_.end()) {
    Tensor t = storage.detached();
    t.tape_ = this;
    t.node_ = it->second;
    return t;
  }
  Tensor t = storage.detached();
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{{}, nullptr, t.size()});
  grads_.emplace_back();
  watched_.emplace(storage.data(), t.node_);
  return t;
}

Tensor Tape::adopt(Tensor result, std::vector<int> parents, BackwardFn backward) {
  result.tape_ = this;
  result.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{std::move(parents), std::move(backward), result.size()});
  grads_.emplace_back();
  return result;
}

double* Tape::grad_buffer(int node) {
  auto& g = grads_.at(static_cast<size_t>(node));
  if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].size), 0.0);
  return g.data();
}

bool Tape::has_grad(int node) const { return !grads_.at(static_cast<size_t>(node)).empty(); }

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::invalid_argument("tape already consumed by a previous backward()");
  if (!loss.tracked() || loss.tape_ != this) throw std::invalid_argument("loss is not tracked on this tape");
  if (loss.size() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  }
  consumed_ = true;
  grad_buffer(loss.node_)[0] = 1.0;
  for (int id = loss.node_; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (grads_[static_cast<size_t>(id)].empty()) continue;  // not an ancestor of the loss
    if (n.backward) n.backward(grads_[static_cast<size_t>(id)].data(), *this);
  }
}

Tensor Tape::grad(const Tensor& tracked) const {
  if (!tracked.tracked() || tracked.tape_ != this) {
    throw std::invalid_argument("grad() requires a tensor tracked on this tape");
  }
  Tensor g(tracked.shape());
  const auto& buf = grads_.at(static_cast<size_t>(tracked.node_));
  if (!buf.empty()) std::copy(buf.begin(), buf.end(), g.data());
  return g;
}

Tensor Tape::grad_for(const Tensor& storage) const {
  auto it = watched_.find(storage.data());
  if (it == watched_.end()) return Tensor(storage.shape());
  const auto& buf = grads_.at(static_cast<size_t>(it->second));
  Tensor g(storage.shape());
  if (!buf.empty()) std::copy(buf.begin(), buf.end(), g.data());
  return g;
}

}  // namespace motionseg
