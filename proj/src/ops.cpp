// Copyright (c) 2026 tmnlab contributors
// SPDX-License-Identifier: Apache-2.0

#include "tmn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tmn/error.hpp"

namespace tmn::ad {

namespace {

Tensor finalize(const std::vector<Tensor>& inputs, Tensor out,
                std::function<void()> fn) {
  Tape* tape = Tape::current();
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  if (tape && needs) {
    out.set_requires_grad(true);
    TapeEntry entry;
    entry.inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) entry.inputs.push_back(t.impl());
    entry.output = out.impl();
    entry.backward = std::move(fn);
    tape->record(std::move(entry));
  }
  return out;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " needs a rank-2 tensor, got " +
                         shape_str(t.shape()));
  }
}

void require_rank1(const Tensor& t, const char* op) {
  if (t.rank() != 1) {
    throw DimensionError(std::string(op) + " needs a rank-1 tensor, got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// df receives (input value, output value).
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  Tensor out = Tensor::zeros(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  return finalize({x}, out, [xi = x.impl(), oi = out.impl(), df]() {
    if (!xi->requires_grad) return;
    auto& g = xi->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += og[i] * df(xi->value[i], oi->value[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul inner dimension mismatch: " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  {
    const double* A = a.value().data();
    const double* B = b.value().data();
    double* C = out.value().data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        double av = A[i * k + kk];
        if (av == 0.0) continue;
        const double* Brow = B + kk * n;
        double* Crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) Crow[j] += av * Brow[j];
      }
    }
  }
  return finalize({a, b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n]() {
    const double* G = oi->grad.data();
    if (ai->requires_grad) {
      double* dA = ai->ensure_grad().data();
      const double* B = bi->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* Grow = G + i * n;
          const double* Brow = B + kk * n;
          for (std::size_t j = 0; j < n; ++j) s += Grow[j] * Brow[j];
          dA[i * k + kk] += s;
        }
      }
    }
    if (bi->requires_grad) {
      double* dB = bi->ensure_grad().data();
      const double* A = ai->value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* Grow = G + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
          double av = A[i * k + kk];
          if (av == 0.0) continue;
          double* dBrow = dB + kk * n;
          for (std::size_t j = 0; j < n; ++j) dBrow[j] += av * Grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros({n, m});
  const auto& av = a.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = av[i * n + j];
  }
  return finalize({a}, out, [ai = a.impl(), oi = out.impl(), m, n]() {
    if (!ai->requires_grad) return;
    auto& g = ai->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += og[j * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  return finalize({a, b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
    const auto& og = oi->grad;
    if (ai->requires_grad) {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  return finalize({a, b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
    const auto& og = oi->grad;
    if (ai->requires_grad) {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= og[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  return finalize({a, b}, out, [ai = a.impl(), bi = b.impl(), oi = out.impl()]() {
    const auto& og = oi->grad;
    if (ai->requires_grad) {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i] * bi->value[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i] * ai->value[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor neg(const Tensor& x) {
  return unary(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor reciprocal(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / v; },
      [](double, double y) { return -y * y; });
}

Tensor scale(const Tensor& x, double c) {
  return unary(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat needs at least one part");
  if (axis > 1) throw DimensionError("concat axis must be 0 or 1");
  std::size_t rank = parts[0].rank();
  for (const Tensor& p : parts) {
    if (p.rank() != rank) {
      throw DimensionError("concat parts must share rank, got " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
  }
  if (axis == 1 && rank != 2) {
    throw DimensionError("concat on axis 1 needs rank-2 parts");
  }

  Tensor out;
  std::vector<std::size_t> offsets(parts.size());
  if (rank == 1 || axis == 0) {
    std::size_t d = rank == 2 ? parts[0].cols() : 0;
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (rank == 2 && parts[p].cols() != d) {
        throw DimensionError("concat on axis 0 needs matching columns: " +
                             shape_str(parts[0].shape()) + " vs " +
                             shape_str(parts[p].shape()));
      }
      offsets[p] = total * std::max<std::size_t>(d, 1);
      total += parts[p].rows();
    }
    out = rank == 2 ? Tensor::zeros({total, d}) : Tensor::zeros({total});
    auto& ov = out.value();
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto& pv = parts[p].value();
      std::copy(pv.begin(), pv.end(), ov.begin() + offsets[p]);
    }
  } else {
    std::size_t r = parts[0].rows();
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (parts[p].rows() != r) {
        throw DimensionError("concat on axis 1 needs matching rows: " +
                             shape_str(parts[0].shape()) + " vs " +
                             shape_str(parts[p].shape()));
      }
      offsets[p] = total;
      total += parts[p].cols();
    }
    out = Tensor::zeros({r, total});
    auto& ov = out.value();
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto& pv = parts[p].value();
      std::size_t d = parts[p].cols();
      for (std::size_t i = 0; i < r; ++i) {
        std::copy(pv.begin() + i * d, pv.begin() + (i + 1) * d,
                  ov.begin() + i * total + offsets[p]);
      }
    }
  }

  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(parts.size());
  for (const Tensor& p : parts) impls.push_back(p.impl());
  bool along_rows = rank == 1 || axis == 0;
  std::size_t out_cols = rank == 2 ? out.cols() : 1;
  return finalize(parts, out, [impls, oi = out.impl(), offsets, along_rows, out_cols]() {
    const auto& og = oi->grad;
    for (std::size_t p = 0; p < impls.size(); ++p) {
      auto& in = *impls[p];
      if (!in.requires_grad) continue;
      auto& g = in.ensure_grad();
      if (along_rows) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[offsets[p] + i];
      } else {
        std::size_t rows = in.shape[0];
        std::size_t d = in.shape[1];
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            g[i * d + j] += og[i * out_cols + offsets[p] + j];
          }
        }
      }
    }
  });
}

Tensor bias_add(const Tensor& m, const Tensor& bias) {
  require_rank2(m, "bias_add");
  require_rank1(bias, "bias_add");
  std::size_t n = m.rows(), d = m.cols();
  if (bias.rows() != d) {
    throw DimensionError("bias_add width mismatch: " + shape_str(m.shape()) +
                         " + " + shape_str(bias.shape()));
  }
  Tensor out = Tensor::zeros({n, d});
  const auto& mv = m.value();
  const auto& bv = bias.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = mv[i * d + j] + bv[j];
  }
  return finalize({m, bias}, out, [mi = m.impl(), bi = bias.impl(), oi = out.impl(), n, d]() {
    const auto& og = oi->grad;
    if (mi->requires_grad) {
      auto& g = mi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
    }
    if (bi->requires_grad) {
      auto& g = bi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) g[j] += og[i * d + j];
      }
    }
  });
}

Tensor row_sum(const Tensor& m) {
  require_rank2(m, "row_sum");
  std::size_t n = m.rows(), d = m.cols();
  Tensor out = Tensor::zeros({n});
  const auto& mv = m.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += mv[i * d + j];
    ov[i] = s;
  }
  return finalize({m}, out, [mi = m.impl(), oi = out.impl(), n, d]() {
    if (!mi->requires_grad) return;
    auto& g = mi->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) g[i * d + j] += og[i];
    }
  });
}

Tensor scale_rows(const Tensor& m, const Tensor& s) {
  require_rank2(m, "scale_rows");
  require_rank1(s, "scale_rows");
  std::size_t n = m.rows(), d = m.cols();
  if (s.rows() != n) {
    throw DimensionError("scale_rows length mismatch: " + shape_str(m.shape()) +
                         " * " + shape_str(s.shape()));
  }
  Tensor out = Tensor::zeros({n, d});
  const auto& mv = m.value();
  const auto& sv = s.value();
  auto& ov = out.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = mv[i * d + j] * sv[i];
  }
  return finalize({m, s}, out, [mi = m.impl(), si = s.impl(), oi = out.impl(), n, d]() {
    const auto& og = oi->grad;
    if (mi->requires_grad) {
      auto& g = mi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) g[i * d + j] += og[i * d + j] * si->value[i];
      }
    }
    if (si->requires_grad) {
      auto& g = si->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += og[i * d + j] * mi->value[i * d + j];
        g[i] += acc;
      }
    }
  });
}

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& idx) {
  require_rank2(m, "gather_rows");
  if (idx.empty()) throw ContractError("gather_rows needs at least one index");
  std::size_t n = m.rows(), d = m.cols();
  for (std::size_t r : idx) {
    if (r >= n) {
      throw IndexError("gather_rows index " + std::to_string(r) +
                       " out of range for " + shape_str(m.shape()));
    }
  }
  Tensor out = Tensor::zeros({idx.size(), d});
  const auto& mv = m.value();
  auto& ov = out.value();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy(mv.begin() + idx[r] * d, mv.begin() + (idx[r] + 1) * d,
              ov.begin() + r * d);
  }
  return finalize({m}, out, [mi = m.impl(), oi = out.impl(), idx, d]() {
    if (!mi->requires_grad) return;
    auto& g = mi->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < d; ++j) g[idx[r] * d + j] += og[r * d + j];
    }
  });
}

Tensor gather(const Tensor& v, const std::vector<std::size_t>& idx) {
  require_rank1(v, "gather");
  if (idx.empty()) throw ContractError("gather needs at least one index");
  std::size_t n = v.rows();
  for (std::size_t r : idx) {
    if (r >= n) {
      throw IndexError("gather index " + std::to_string(r) +
                       " out of range for " + shape_str(v.shape()));
    }
  }
  Tensor out = Tensor::zeros({idx.size()});
  const auto& vv = v.value();
  auto& ov = out.value();
  for (std::size_t r = 0; r < idx.size(); ++r) ov[r] = vv[idx[r]];
  return finalize({v}, out, [vi = v.impl(), oi = out.impl(), idx]() {
    if (!vi->requires_grad) return;
    auto& g = vi->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t r = 0; r < idx.size(); ++r) g[idx[r]] += og[r];
  });
}

Tensor reshape(const Tensor& t, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  if (shape.empty() || n != t.numel()) {
    throw DimensionError("reshape cannot change element count: " +
                         shape_str(t.shape()) + " -> " + shape_str(shape));
  }
  Tensor out = Tensor::from(t.value(), std::move(shape));
  return finalize({t}, out, [ti = t.impl(), oi = out.impl()]() {
    if (!ti->requires_grad) return;
    auto& g = ti->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += og[i];
  });
}

Tensor sum(const Tensor& t) {
  Tensor out = Tensor::zeros({1});
  double s = 0.0;
  for (double v : t.value()) s += v;
  out.value()[0] = s;
  return finalize({t}, out, [ti = t.impl(), oi = out.impl()]() {
    if (!ti->requires_grad) return;
    auto& g = ti->ensure_grad();
    double og = oi->grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += og;
  });
}

Tensor segment_sum(const Tensor& values, const std::vector<std::size_t>& ids,
                   std::size_t num_segments) {
  require_rank2(values, "segment_sum");
  if (num_segments == 0) throw ContractError("segment_sum needs num_segments >= 1");
  std::size_t n = values.rows(), d = values.cols();
  if (ids.size() != n) {
    throw DimensionError("segment_sum needs one id per row: " +
                         std::to_string(ids.size()) + " ids for " +
                         shape_str(values.shape()));
  }
  for (std::size_t id : ids) {
    if (id >= num_segments) {
      throw IndexError("segment id " + std::to_string(id) +
                       " out of range for " + std::to_string(num_segments) +
                       " segments");
    }
  }
  Tensor out = Tensor::zeros({num_segments, d});
  const auto& vv = values.value();
  auto& ov = out.value();
  for (std::size_t r = 0; r < n; ++r) {
    double* dst = ov.data() + ids[r] * d;
    const double* src = vv.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  return finalize({values}, out, [vi = values.impl(), oi = out.impl(), ids, d]() {
    if (!vi->requires_grad) return;
    auto& g = vi->ensure_grad();
    const auto& og = oi->grad;
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const double* src = og.data() + ids[r] * d;
      double* dst = g.data() + r * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Tensor segment_softmax(const Tensor& scores, const std::vector<std::size_t>& ids,
                       std::size_t num_segments) {
  require_rank1(scores, "segment_softmax");
  if (num_segments == 0) {
    throw ContractError("segment_softmax needs num_segments >= 1");
  }
  std::size_t n = scores.rows();
  if (ids.size() != n) {
    throw DimensionError("segment_softmax needs one id per score: " +
                         std::to_string(ids.size()) + " ids for " +
                         std::to_string(n) + " scores");
  }
  std::vector<std::size_t> count(num_segments, 0);
  for (std::size_t id : ids) {
    if (id >= num_segments) {
      throw IndexError("segment id " + std::to_string(id) +
                       " out of range for " + std::to_string(num_segments) +
                       " segments");
    }
    ++count[id];
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (count[s] == 0) {
      throw DegenerateError("segment_softmax: empty segment " +
                            std::to_string(s) + " of " +
                            std::to_string(num_segments));
    }
  }

  const auto& sv = scores.value();
  std::vector<double> mx(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < n; ++r) mx[ids[r]] = std::max(mx[ids[r]], sv[r]);
  Tensor out = Tensor::zeros({n});
  auto& ov = out.value();
  std::vector<double> denom(num_segments, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    ov[r] = std::exp(sv[r] - mx[ids[r]]);
    denom[ids[r]] += ov[r];
  }
  for (std::size_t r = 0; r < n; ++r) ov[r] /= denom[ids[r]];

  return finalize({scores}, out, [si = scores.impl(), oi = out.impl(), ids, num_segments]() {
    if (!si->requires_grad) return;
    auto& g = si->ensure_grad();
    const auto& og = oi->grad;
    const auto& y = oi->value;
    std::vector<double> dot(num_segments, 0.0);
    for (std::size_t r = 0; r < ids.size(); ++r) dot[ids[r]] += og[r] * y[r];
    for (std::size_t r = 0; r < ids.size(); ++r) {
      g[r] += y[r] * (og[r] - dot[ids[r]]);
    }
  });
}

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& params,
                           double epsilon) {
  if (params.empty()) throw ContractError("grad_check needs at least one parameter");
  if (epsilon <= 0.0) throw ContractError("grad_check needs epsilon > 0");

  for (const auto& [name, p] : params) {
    Tensor t = p;
    if (!t.requires_grad()) {
      throw ContractError("grad_check parameter " + name + " has requires_grad off");
    }
    t.zero_grad();
  }

  Tape tape;
  Tensor loss;
  {
    TapeScope guard(tape);
    loss = f();
  }
  if (!loss.is_scalar()) {
    throw ContractError("grad_check loss must be scalar, got " +
                        shape_str(loss.shape()));
  }
  if (!std::isfinite(loss.item())) {
    throw NumericError("grad_check: non-finite loss at the base point");
  }
  backward(loss, tape);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) analytic.push_back(p.grad());

  GradCheckReport report;
  NoGradScope eval_only;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const std::string& name = params[pi].first;
    Tensor p = params[pi].second;
    auto& v = p.value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double orig = v[i];
      v[i] = orig + epsilon;
      double lp = f().item();
      v[i] = orig - epsilon;
      double lm = f().item();
      v[i] = orig;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw NumericError("grad_check: non-finite loss perturbing " + name +
                           "[" + std::to_string(i) + "]");
      }
      double numeric = (lp - lm) / (2.0 * epsilon);
      double analytic_v = analytic[pi][i];
      double rel = std::fabs(analytic_v - numeric) /
                   std::max({std::fabs(analytic_v), std::fabs(numeric), 1e-8});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace tmn::ad
