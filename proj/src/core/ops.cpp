#include "capsre/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "capsre/kernels.hpp"

namespace capsre::ops {

namespace {

using TensorPtr = std::shared_ptr<const Tensor>;

struct Dims {
  std::size_t rows;
  std::size_t cols;
};

Dims dims2(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw ContractViolation(std::string(op) + ": expected rank 1 or 2, got " +
                          t.shape().str());
}

template <std::size_t N>
Var emit(Tensor out, const std::array<Var, N>& inputs, BackwardFn fn) {
  return Tape::record(std::move(out), std::span<const Var>(inputs),
                      std::move(fn));
}

template <std::size_t N>
Var emit(TensorPtr out, const std::array<Var, N>& inputs, BackwardFn fn) {
  return Tape::record(std::move(out), std::span<const Var>(inputs),
                      std::move(fn));
}

// Elementwise op whose derivative is expressed through the output value y
// (and optionally the input x).
template <typename Fwd, typename Deriv>
Var pointwise(const Var& a, Fwd fwd, Deriv deriv) {
  auto out = std::make_shared<Tensor>(a.shape());
  auto x = a.value().data();
  auto y = out->data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  TensorPtr in = a.shared();
  TensorPtr res = out;
  return emit(res, std::array<Var, 1>{a},
              [in, res, deriv](const Tensor& g, std::span<Tensor* const> gi) {
                auto ga = gi[0]->data();
                auto gv = g.data();
                auto xv = in->data();
                auto yv = res->data();
                for (std::size_t i = 0; i < ga.size(); ++i) {
                  ga[i] += gv[i] * deriv(xv[i], yv[i]);
                }
              });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a.shape(), b.shape());
  Tensor out = a.value();
  out += b.value();
  return emit(std::move(out), std::array<Var, 2>{a, b},
              [](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) *gi[0] += g;
                if (gi[1]) *gi[1] += g;
              });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a.shape(), b.shape());
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return emit(std::move(out), std::array<Var, 2>{a, b},
              [](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) *gi[0] += g;
                if (gi[1]) {
                  auto d = gi[1]->data();
                  auto gv = g.data();
                  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gv[i];
                }
              });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a.shape(), b.shape());
  Tensor out(a.shape());
  auto o = out.data();
  auto av = a.value().data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  TensorPtr pa = a.shared(), pb = b.shared();
  return emit(std::move(out), std::array<Var, 2>{a, b},
              [pa, pb](const Tensor& g, std::span<Tensor* const> gi) {
                auto gv = g.data();
                if (gi[0]) {
                  auto d = gi[0]->data();
                  auto bv = pb->data();
                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] * bv[i];
                }
                if (gi[1]) {
                  auto d = gi[1]->data();
                  auto av = pa->data();
                  for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] * av[i];
                }
              });
}

Var add_row(const Var& a, const Var& bias) {
  const Dims da = dims2(a.value(), "add_row");
  if (bias.value().size() != da.cols) {
    throw ContractViolation("add_row: bias " + bias.shape().str() +
                            " does not match columns of " + a.shape().str());
  }
  Tensor out = a.value();
  auto o = out.data();
  auto bv = bias.value().data();
  for (std::size_t r = 0; r < da.rows; ++r) {
    for (std::size_t c = 0; c < da.cols; ++c) o[r * da.cols + c] += bv[c];
  }
  return emit(std::move(out), std::array<Var, 2>{a, bias},
              [da](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) *gi[0] += g;
                if (gi[1]) {
                  auto d = gi[1]->data();
                  auto gv = g.data();
                  for (std::size_t r = 0; r < da.rows; ++r) {
                    for (std::size_t c = 0; c < da.cols; ++c) {
                      d[c] += gv[r * da.cols + c];
                    }
                  }
                }
              });
}

Var scale_rows(const Var& a, const Var& scale) {
  const Dims da = dims2(a.value(), "scale_rows");
  if (scale.value().size() != da.rows) {
    throw ContractViolation("scale_rows: scale " + scale.shape().str() +
                            " does not match rows of " + a.shape().str());
  }
  Tensor out(a.shape());
  auto o = out.data();
  auto av = a.value().data();
  auto sv = scale.value().data();
  for (std::size_t r = 0; r < da.rows; ++r) {
    for (std::size_t c = 0; c < da.cols; ++c) {
      o[r * da.cols + c] = av[r * da.cols + c] * sv[r];
    }
  }
  TensorPtr pa = a.shared(), ps = scale.shared();
  return emit(std::move(out), std::array<Var, 2>{a, scale},
              [pa, ps, da](const Tensor& g, std::span<Tensor* const> gi) {
                auto gv = g.data();
                auto av = pa->data();
                auto sv = ps->data();
                if (gi[0]) {
                  auto d = gi[0]->data();
                  for (std::size_t r = 0; r < da.rows; ++r) {
                    for (std::size_t c = 0; c < da.cols; ++c) {
                      d[r * da.cols + c] += gv[r * da.cols + c] * sv[r];
                    }
                  }
                }
                if (gi[1]) {
                  auto d = gi[1]->data();
                  for (std::size_t r = 0; r < da.rows; ++r) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < da.cols; ++c) {
                      acc += gv[r * da.cols + c] * av[r * da.cols + c];
                    }
                    d[r] += acc;
                  }
                }
              });
}

Var matmul(const Var& a, const Var& b) {
  const Dims da = dims2(a.value(), "matmul");
  const Dims db = dims2(b.value(), "matmul");
  if (da.cols != db.rows) {
    throw ContractViolation("matmul: inner dimensions differ, " +
                            a.shape().str() + " x " + b.shape().str());
  }
  const std::size_t m = da.rows, k = da.cols, n = db.cols;
  Tensor out(Shape{m, n});
  kernels::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  TensorPtr pa = a.shared(), pb = b.shared();
  return emit(std::move(out), std::array<Var, 2>{a, b},
              [pa, pb, m, k, n](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) kernels::gemm_nt(g.data(), pb->data(), gi[0]->data(), m, n, k);
                if (gi[1]) kernels::gemm_tn(pa->data(), g.data(), gi[1]->data(), m, k, n);
              });
}

Var transpose(const Var& a) {
  const Dims da = dims2(a.value(), "transpose");
  Tensor out(Shape{da.cols, da.rows});
  auto o = out.data();
  auto av = a.value().data();
  for (std::size_t r = 0; r < da.rows; ++r) {
    for (std::size_t c = 0; c < da.cols; ++c) o[c * da.rows + r] = av[r * da.cols + c];
  }
  return emit(std::move(out), std::array<Var, 1>{a},
              [da](const Tensor& g, std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto gv = g.data();
                for (std::size_t r = 0; r < da.rows; ++r) {
                  for (std::size_t c = 0; c < da.cols; ++c) {
                    d[r * da.cols + c] += gv[c * da.rows + r];
                  }
                }
              });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractViolation("concat: no operands");
  if (axis > 1) throw ContractViolation("concat: axis must be 0 or 1");
  std::vector<Dims> dims;
  dims.reserve(parts.size());
  for (const Var& p : parts) dims.push_back(dims2(p.value(), "concat"));
  std::size_t rows = 0, cols = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Dims& d = dims[i];
    if (axis == 0) {
      if (i > 0 && d.cols != cols) {
        throw ContractViolation("concat(axis=0): column mismatch " +
                                parts[0].shape().str() + " vs " +
                                parts[i].shape().str());
      }
      cols = d.cols;
      rows += d.rows;
    } else {
      if (i > 0 && d.rows != rows) {
        throw ContractViolation("concat(axis=1): row mismatch " +
                                parts[0].shape().str() + " vs " +
                                parts[i].shape().str());
      }
      rows = d.rows;
      cols += d.cols;
    }
  }
  Tensor out(Shape{rows, cols});
  auto o = out.data();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto src = parts[i].value().data();
    const Dims& d = dims[i];
    if (axis == 0) {
      std::copy(src.begin(), src.end(), o.begin() + offset * cols);
      offset += d.rows;
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(src.begin() + r * d.cols, d.cols,
                    o.begin() + r * cols + offset);
      }
      offset += d.cols;
    }
  }
  return Tape::record(
      std::move(out), parts,
      [dims, axis, cols](const Tensor& g, std::span<Tensor* const> gi) {
        auto gv = g.data();
        std::size_t offset = 0;
        for (std::size_t i = 0; i < dims.size(); ++i) {
          const Dims& d = dims[i];
          if (gi[i]) {
            auto dst = gi[i]->data();
            for (std::size_t r = 0; r < d.rows; ++r) {
              for (std::size_t c = 0; c < d.cols; ++c) {
                const std::size_t src =
                    axis == 0 ? (offset + r) * cols + c : r * cols + offset + c;
                dst[r * d.cols + c] += gv[src];
              }
            }
          }
          offset += axis == 0 ? d.rows : d.cols;
        }
      });
}

Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Dims da = dims2(a.value(), "slice");
  const std::size_t extent = axis == 0 ? da.rows : da.cols;
  if (axis > 1 || begin > end || end > extent) {
    throw ContractViolation("slice: range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") on axis " +
                            std::to_string(axis) + " invalid for " +
                            a.shape().str());
  }
  const std::size_t rows = axis == 0 ? end - begin : da.rows;
  const std::size_t cols = axis == 1 ? end - begin : da.cols;
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 1 ? begin : 0;
  Tensor out(Shape{rows, cols});
  auto o = out.data();
  auto av = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.begin() + (r0 + r) * da.cols + c0, cols, o.begin() + r * cols);
  }
  return emit(std::move(out), std::array<Var, 1>{a},
              [da, rows, cols, r0, c0](const Tensor& g,
                                       std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto gv = g.data();
                for (std::size_t r = 0; r < rows; ++r) {
                  for (std::size_t c = 0; c < cols; ++c) {
                    d[(r0 + r) * da.cols + c0 + c] += gv[r * cols + c];
                  }
                }
              });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(shape);
  return emit(std::move(out), std::array<Var, 1>{a},
              [](const Tensor& g, std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto gv = g.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i];
              });
}

Var sigmoid(const Var& a) {
  return pointwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return pointwise(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return pointwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(const Var& a) {
  return pointwise(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var scale(const Var& a, double factor) {
  return pointwise(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double value) {
  return pointwise(
      a, [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return emit(Tensor::scalar(s), std::array<Var, 1>{a},
              [](const Tensor& g, std::span<Tensor* const> gi) {
                const double gv = g.item();
                for (double& d : gi[0]->data()) d += gv;
              });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractViolation("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var softmax(const Var& a, std::size_t axis,
            std::optional<std::span<const char>> mask) {
  Dims da = dims2(a.value(), "softmax");
  if (a.value().rank() == 1) {
    if (axis != 0) throw ContractViolation("softmax: axis out of range for vector");
    axis = 1;
  }
  if (axis > 1) throw ContractViolation("softmax: axis must be 0 or 1");
  if (mask && mask->size() != a.value().size()) {
    throw ContractViolation("softmax: mask length " +
                            std::to_string(mask->size()) +
                            " does not match " + a.shape().str());
  }
  // Slice s, element t -> flat index.
  const std::size_t slices = axis == 1 ? da.rows : da.cols;
  const std::size_t len = axis == 1 ? da.cols : da.rows;
  auto at = [da, axis](std::size_t s, std::size_t t) {
    return axis == 1 ? s * da.cols + t : t * da.cols + s;
  };
  auto out = std::make_shared<Tensor>(a.shape());
  auto o = out->data();
  auto x = a.value().data();
  for (std::size_t s = 0; s < slices; ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) {
      if (mask && !(*mask)[at(s, t)]) continue;
      mx = std::max(mx, x[at(s, t)]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ContractViolation("softmax: every entry of a slice is masked");
    }
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t i = at(s, t);
      o[i] = (mask && !(*mask)[i]) ? 0.0 : std::exp(x[i] - mx);
      z += o[i];
    }
    for (std::size_t t = 0; t < len; ++t) o[at(s, t)] /= z;
  }
  TensorPtr res = out;
  return emit(res, std::array<Var, 1>{a},
              [res, slices, len, at](const Tensor& g,
                                     std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto gv = g.data();
                auto y = res->data();
                for (std::size_t s = 0; s < slices; ++s) {
                  double dot = 0.0;
                  for (std::size_t t = 0; t < len; ++t) {
                    dot += y[at(s, t)] * gv[at(s, t)];
                  }
                  for (std::size_t t = 0; t < len; ++t) {
                    const std::size_t i = at(s, t);
                    d[i] += y[i] * (gv[i] - dot);
                  }
                }
              });
}

Var l2_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  const double n = std::sqrt(s);
  TensorPtr pa = a.shared();
  return emit(Tensor::scalar(n), std::array<Var, 1>{a},
              [pa, n](const Tensor& g, std::span<Tensor* const> gi) {
                if (n == 0.0) return;
                const double k = g.item() / n;
                auto d = gi[0]->data();
                auto x = pa->data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * x[i];
              });
}

Var row_norms(const Var& a) {
  const Dims da = dims2(a.value(), "row_norms");
  auto out = std::make_shared<Tensor>(Shape{da.rows});
  auto x = a.value().data();
  for (std::size_t r = 0; r < da.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < da.cols; ++c) s += x[r * da.cols + c] * x[r * da.cols + c];
    (*out)[r] = std::sqrt(s);
  }
  TensorPtr pa = a.shared(), res = out;
  return emit(res, std::array<Var, 1>{a},
              [pa, res, da](const Tensor& g, std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto x = pa->data();
                for (std::size_t r = 0; r < da.rows; ++r) {
                  const double n = (*res)[r];
                  if (n == 0.0) continue;
                  const double k = g[r] / n;
                  for (std::size_t c = 0; c < da.cols; ++c) {
                    d[r * da.cols + c] += k * x[r * da.cols + c];
                  }
                }
              });
}

Var squash_rows(const Var& a) {
  const Dims da = dims2(a.value(), "squash_rows");
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t r = 0; r < da.rows; ++r) {
    double n2 = 0.0;
    for (std::size_t c = 0; c < da.cols; ++c) n2 += x[r * da.cols + c] * x[r * da.cols + c];
    const double n = std::sqrt(n2);
    // n^2 / (0.5 + n^2) / n, which is 0 at n = 0.
    const double f = n / (0.5 + n2);
    for (std::size_t c = 0; c < da.cols; ++c) o[r * da.cols + c] = f * x[r * da.cols + c];
  }
  TensorPtr pa = a.shared();
  return emit(std::move(out), std::array<Var, 1>{a},
              [pa, da](const Tensor& g, std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto x = pa->data();
                auto gv = g.data();
                for (std::size_t r = 0; r < da.rows; ++r) {
                  const std::size_t base = r * da.cols;
                  double n2 = 0.0, xg = 0.0;
                  for (std::size_t c = 0; c < da.cols; ++c) {
                    n2 += x[base + c] * x[base + c];
                    xg += x[base + c] * gv[base + c];
                  }
                  if (n2 == 0.0) continue;
                  const double n = std::sqrt(n2);
                  const double denom = 0.5 + n2;
                  const double f = n / denom;
                  // f'(n) / n with f(n) = n / (0.5 + n^2)
                  const double df_over_n = (0.5 - n2) / (denom * denom) / n;
                  for (std::size_t c = 0; c < da.cols; ++c) {
                    d[base + c] += f * gv[base + c] + df_over_n * xg * x[base + c];
                  }
                }
              });
}

Var dropout(const Var& a, double keep, bool training, Rng& rng) {
  if (!(keep > 0.0 && keep <= 1.0)) {
    throw ContractViolation("dropout: keep probability must be in (0, 1], got " +
                            std::to_string(keep));
  }
  if (!training || keep == 1.0) return a;
  auto mask = std::make_shared<Tensor>(a.shape());
  for (double& m : mask->data()) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  Tensor out(a.shape());
  auto o = out.data();
  auto x = a.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * (*mask)[i];
  TensorPtr pm = mask;
  return emit(std::move(out), std::array<Var, 1>{a},
              [pm](const Tensor& g, std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto gv = g.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv[i] * (*pm)[i];
              });
}

Var gather_rows(const Var& table, std::span<const std::int64_t> ids) {
  const Dims dt = dims2(table.value(), "gather_rows");
  Tensor out(Shape{ids.size(), dt.cols});
  auto o = out.data();
  auto t = table.value().data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const std::int64_t id = ids[r];
    if (id < 0) continue;
    if (static_cast<std::size_t>(id) >= dt.rows) {
      throw ContractViolation("gather_rows: id " + std::to_string(id) +
                              " out of range for table " + table.shape().str());
    }
    std::copy_n(t.begin() + id * dt.cols, dt.cols, o.begin() + r * dt.cols);
  }
  std::vector<std::int64_t> idv(ids.begin(), ids.end());
  return emit(std::move(out), std::array<Var, 1>{table},
              [idv = std::move(idv), dt](const Tensor& g,
                                         std::span<Tensor* const> gi) {
                auto d = gi[0]->data();
                auto gv = g.data();
                for (std::size_t r = 0; r < idv.size(); ++r) {
                  if (idv[r] < 0) continue;
                  const std::size_t base = static_cast<std::size_t>(idv[r]) * dt.cols;
                  for (std::size_t c = 0; c < dt.cols; ++c) d[base + c] += gv[r * dt.cols + c];
                }
              });
}

Var capsule_votes(const Var& u, const Var& weights, const Var& bias) {
  const Dims du = dims2(u.value(), "capsule_votes");
  const Tensor& w = weights.value();
  if (w.rank() != 3 || w.dim(1) != du.cols || w.dim(2) != du.cols) {
    throw ContractViolation("capsule_votes: weights " + w.shape().str() +
                            " incompatible with capsules " + u.shape().str());
  }
  const std::size_t h = du.rows, d = du.cols, e = w.dim(0);
  if (bias.value().size() != e * d) {
    throw ContractViolation("capsule_votes: bias " + bias.shape().str() +
                            " should hold " + std::to_string(e) + "x" +
                            std::to_string(d));
  }
  Tensor out(Shape{h, e, d});
  auto o = out.data();
  auto bv = bias.value().data();
  for (std::size_t i = 0; i < h; ++i) {
    std::copy(bv.begin(), bv.end(), o.begin() + i * e * d);
  }
  kernels::gemm_nt(u.value().data(), w.data(), o, h, d, e * d);
  TensorPtr pu = u.shared(), pw = weights.shared();
  return emit(std::move(out), std::array<Var, 3>{u, weights, bias},
              [pu, pw, h, e, d](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) kernels::gemm_nn(g.data(), pw->data(), gi[0]->data(), h, e * d, d);
                if (gi[1]) kernels::gemm_tn(g.data(), pu->data(), gi[1]->data(), h, e * d, d);
                if (gi[2]) {
                  auto db = gi[2]->data();
                  auto gv = g.data();
                  for (std::size_t i = 0; i < h; ++i) {
                    for (std::size_t k = 0; k < e * d; ++k) db[k] += gv[i * e * d + k];
                  }
                }
              });
}

Var route_aggregate(const Var& coupling, const Var& votes) {
  const Tensor& v = votes.value();
  if (v.rank() != 3) {
    throw ContractViolation("route_aggregate: votes must be rank 3, got " +
                            v.shape().str());
  }
  const std::size_t h = v.dim(0), e = v.dim(1), d = v.dim(2);
  if (coupling.value().shape() != Shape{h, e}) {
    throw ContractViolation("route_aggregate: coupling " +
                            coupling.shape().str() + " vs votes " +
                            v.shape().str());
  }
  Tensor out(Shape{e, d});
  kernels::route_aggregate(coupling.value().data(), v.data(), out.data(), h, e, d);
  TensorPtr pc = coupling.shared(), pv = votes.shared();
  return emit(std::move(out), std::array<Var, 2>{coupling, votes},
              [pc, pv, h, e, d](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) kernels::route_agreement(pv->data(), g.data(), gi[0]->data(), h, e, d);
                if (gi[1]) kernels::route_scatter(pc->data(), g.data(), gi[1]->data(), h, e, d);
              });
}

Var route_agreement(const Var& votes, const Var& parents) {
  const Tensor& v = votes.value();
  if (v.rank() != 3) {
    throw ContractViolation("route_agreement: votes must be rank 3, got " +
                            v.shape().str());
  }
  const std::size_t h = v.dim(0), e = v.dim(1), d = v.dim(2);
  if (parents.value().shape() != Shape{e, d}) {
    throw ContractViolation("route_agreement: parents " + parents.shape().str() +
                            " vs votes " + v.shape().str());
  }
  Tensor out(Shape{h, e});
  kernels::route_agreement(v.data(), parents.value().data(), out.data(), h, e, d);
  TensorPtr pv = votes.shared(), pp = parents.shared();
  return emit(std::move(out), std::array<Var, 2>{votes, parents},
              [pv, pp, h, e, d](const Tensor& g, std::span<Tensor* const> gi) {
                if (gi[0]) kernels::route_scatter(g.data(), pp->data(), gi[0]->data(), h, e, d);
                if (gi[1]) kernels::route_aggregate(g.data(), pv->data(), gi[1]->data(), h, e, d);
              });
}

}  // namespace capsre::ops
