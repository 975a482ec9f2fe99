// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tmn::ad {

/// Shared storage behind a Tensor handle. Values are float64, row-major.
/// The gradient buffer stays empty until something asks for it.
struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;

  std::size_t numel() const { return value.size(); }
  std::vector<double>& ensure_grad();
};

/// Cheap copyable handle to a TensorImpl. Rank is 1 or 2; a scalar is
/// shape {1}. Shape extents must be positive.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor constant(std::vector<std::size_t> shape, double v);
  static Tensor from(std::vector<double> data, std::vector<std::size_t> shape,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool valid() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return numel() == 1; }

  std::vector<double>& value();
  const std::vector<double>& value() const;

  /// Gradient buffer, allocated to zeros on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  void set_requires_grad(bool v);

  /// Scalar read; requires numel() == 1.
  double item() const;

  bool all_finite() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Human-readable shape like "3x4", for error messages.
std::string shape_str(const std::vector<std::size_t>& shape);

/// One recorded operation: the closure reads output->grad and accumulates
/// into each input's grad (inputs with requires_grad == false are skipped
/// by the closure itself).
struct TapeEntry {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  std::function<void()> backward;
};

/// Append-only record of operations, replayed in reverse by backward().
class Tape {
public:
  void record(TapeEntry entry) { entries_.push_back(std::move(entry)); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }
  const std::vector<TapeEntry>& entries() const { return entries_; }

  /// The tape ops currently record onto, or nullptr when none is active.
  static Tape* current();

private:
  std::vector<TapeEntry> entries_;
};

/// RAII activation of a tape on this thread. Scopes nest; the previous
/// tape is restored on destruction.
class TapeScope {
public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

private:
  Tape* previous_;
};

/// RAII deactivation of taping on this thread: ops run as plain forward
/// evaluation until the scope ends.
class NoGradScope {
public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

private:
  Tape* previous_;
};

/// Reverse pass: seeds d(loss)/d(loss) = 1 and walks the tape backwards.
/// Gradients of tensors recorded as entry outputs are reset first; leaf
/// gradients accumulate across calls until zero_grad().
void backward(const Tensor& loss, Tape& tape);

}  // namespace tmn::ad
