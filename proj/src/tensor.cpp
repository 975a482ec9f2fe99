// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/tensor.hpp"

#include <cmath>
#include <numeric>

#include "tmn/error.hpp"

namespace tmn::ad {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got " + shape_str(shape));
  }
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) {
      throw DimensionError("shape extents must be positive, got " + shape_str(shape));
    }
    n *= e;
  }
  return n;
}

}  // namespace

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = checked_numel(shape);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value.assign(n, 0.0);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::constant(std::vector<std::size_t> shape, double v) {
  Tensor t = zeros(std::move(shape), false);
  std::fill(t.value().begin(), t.value().end(), v);
  return t;
}

Tensor Tensor::from(std::vector<double> data, std::vector<std::size_t> shape,
                    bool requires_grad) {
  std::size_t n = checked_numel(shape);
  if (n != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({v}, {1}, requires_grad);
}

const std::vector<std::size_t>& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  return impl_->shape;
}

std::size_t Tensor::numel() const {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  return impl_->numel();
}

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) {
    throw DimensionError("cols() needs a rank-2 tensor, got " + shape_str(s));
  }
  return s[1];
}

std::vector<double>& Tensor::value() {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  return impl_->value;
}

const std::vector<double>& Tensor::value() const {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  return impl_->value;
}

std::vector<double>& Tensor::grad() {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  return impl_->ensure_grad();
}

const std::vector<double>& Tensor::grad() const {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  return impl_->ensure_grad();
}

bool Tensor::has_grad() const {
  if (!impl_) return false;
  return !impl_->grad.empty();
}

void Tensor::zero_grad() {
  if (!impl_) return;
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!impl_) throw ContractError("use of an empty tensor handle");
  impl_->requires_grad = v;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() needs a single-element tensor, got " +
                         shape_str(shape()));
  }
  return value()[0];
}

bool Tensor::all_finite() const {
  for (double v : value()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tape* Tape::current() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }

NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void backward(const Tensor& loss, Tape& tape) {
  if (!loss.valid()) throw ContractError("backward on an empty tensor handle");
  if (!loss.is_scalar()) {
    throw ContractError("backward needs a scalar loss, got " +
                        shape_str(loss.shape()));
  }
  for (const TapeEntry& e : tape.entries()) {
    auto& g = e.output->ensure_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
  loss.impl()->ensure_grad()[0] += 1.0;
  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    it->backward();
  }
}

}  // namespace tmn::ad
