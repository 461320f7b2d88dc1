#include "ncdre/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ncdre {

namespace {

template <typename Scalar>
using NodeT = detail::Node<Scalar>;

template <typename Scalar>
[[noreturn]] void mismatch(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

enum class Broadcast { None, Row };

template <typename Scalar>
Broadcast broadcast_kind(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::None;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
  mismatch(op, a, b);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  Matrix<Scalar> out = a.value() * b.value();
  const Shape shape{out.rows(), out.cols()};
  return detail::record<Scalar>(std::move(out), shape, {a, b}, [](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (A.requires_grad) A.accumulate(self.grad * B.value.transpose());
    if (B.requires_grad) B.accumulate(A.value.transpose() * self.grad);
  });
}

template <typename Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.cols() != b.cols()) mismatch("matmul_nt", a, b);
  Matrix<Scalar> out = a.value() * b.value().transpose();
  const Shape shape{out.rows(), out.cols()};
  return detail::record<Scalar>(std::move(out), shape, {a, b}, [](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (A.requires_grad) A.accumulate(self.grad * B.value);
    if (B.requires_grad) B.accumulate(self.grad.transpose() * A.value);
  });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const auto kind = broadcast_kind("add", a, b);
  Matrix<Scalar> out;
  if (kind == Broadcast::None) {
    out = a.value() + b.value();
  } else {
    out = a.value().rowwise() + b.value().row(0);
  }
  return detail::record<Scalar>(std::move(out), a.shape(), {a, b}, [kind](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (A.requires_grad) A.accumulate(self.grad);
    if (B.requires_grad) {
      if (kind == Broadcast::None) {
        B.accumulate(self.grad);
      } else {
        B.accumulate(self.grad.colwise().sum());
      }
    }
  });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const auto kind = broadcast_kind("sub", a, b);
  Matrix<Scalar> out;
  if (kind == Broadcast::None) {
    out = a.value() - b.value();
  } else {
    out = a.value().rowwise() - b.value().row(0);
  }
  return detail::record<Scalar>(std::move(out), a.shape(), {a, b}, [kind](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (A.requires_grad) A.accumulate(self.grad);
    if (B.requires_grad) {
      if (kind == Broadcast::None) {
        B.accumulate(-self.grad);
      } else {
        B.accumulate(-self.grad.colwise().sum());
      }
    }
  });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const auto kind = broadcast_kind("mul", a, b);
  Matrix<Scalar> out;
  if (kind == Broadcast::None) {
    out = a.value().cwiseProduct(b.value());
  } else {
    out = (a.value().array().rowwise() * b.value().row(0).array()).matrix();
  }
  return detail::record<Scalar>(std::move(out), a.shape(), {a, b}, [kind](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    if (kind == Broadcast::None) {
      if (A.requires_grad) A.accumulate(self.grad.cwiseProduct(B.value));
      if (B.requires_grad) B.accumulate(self.grad.cwiseProduct(A.value));
    } else {
      if (A.requires_grad) {
        A.accumulate((self.grad.array().rowwise() * B.value.row(0).array()).matrix());
      }
      if (B.requires_grad) B.accumulate(self.grad.cwiseProduct(A.value).colwise().sum());
    }
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  Matrix<Scalar> out = a.value() * factor;
  return detail::record<Scalar>(std::move(out), a.shape(), {a}, [factor](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    A.accumulate(self.grad * factor);
  });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return detail::record<Scalar>(std::move(out), a.shape(), {a}, [](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    A.accumulate((self.grad.array() * (Scalar(1) - self.value.array().square())).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) {
    // Branch keeps exp() from overflowing for large |x|.
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  });
  return detail::record<Scalar>(std::move(out), a.shape(), {a}, [](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    A.accumulate(
        (self.grad.array() * self.value.array() * (Scalar(1) - self.value.array())).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return detail::record<Scalar>(std::move(out), a.shape(), {a}, [](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    A.accumulate((A.value.array() > Scalar(0)).select(self.grad.array(), Scalar(0)).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) mismatch("concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<Index> offsets;
  offsets.reserve(parts.size());
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    at += p.cols();
  }
  const Shape shape{rows, cols};
  return detail::record<Scalar>(std::move(out), shape, parts,
                                [offsets = std::move(offsets)](NodeT<Scalar>& self) {
                                  for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                                    auto& P = *self.inputs[i];
                                    if (!P.requires_grad) continue;
                                    P.accumulate(self.grad.middleCols(offsets[i], P.value.cols()));
                                  }
                                });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) mismatch("concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<Index> offsets;
  offsets.reserve(parts.size());
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    offsets.push_back(at);
    at += p.rows();
  }
  const Shape shape{rows, cols};
  return detail::record<Scalar>(std::move(out), shape, parts,
                                [offsets = std::move(offsets)](NodeT<Scalar>& self) {
                                  for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                                    auto& P = *self.inputs[i];
                                    if (!P.requires_grad) continue;
                                    P.accumulate(self.grad.middleRows(offsets[i], P.value.rows()));
                                  }
                                });
}

template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + to_string(a.shape()));
  }
  Matrix<Scalar> out = a.value().middleCols(start, count);
  const Shape shape{a.rows(), count};
  return detail::record<Scalar>(std::move(out), shape, {a}, [start](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    if (A.grad.size() == 0) A.grad = Matrix<Scalar>::Zero(A.value.rows(), A.value.cols());
    A.grad.middleCols(start, self.grad.cols()) += self.grad;
  });
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + to_string(a.shape()));
  }
  Matrix<Scalar> out = a.value().middleRows(start, count);
  const Shape shape{count, a.cols()};
  return detail::record<Scalar>(std::move(out), shape, {a}, [start](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    if (A.grad.size() == 0) A.grad = Matrix<Scalar>::Zero(A.value.rows(), A.value.cols());
    A.grad.middleRows(start, self.grad.rows()) += self.grad;
  });
}

template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<Scalar>& a, std::span<const Index> rows) {
  Matrix<Scalar> out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                       to_string(a.shape()));
    }
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  const Shape shape{out.rows(), out.cols()};
  std::vector<Index> idx(rows.begin(), rows.end());
  return detail::record<Scalar>(std::move(out), shape, {a},
                                [idx = std::move(idx)](NodeT<Scalar>& self) {
                                  auto& A = *self.inputs[0];
                                  if (A.grad.size() == 0) {
                                    A.grad = Matrix<Scalar>::Zero(A.value.rows(), A.value.cols());
                                  }
                                  for (std::size_t i = 0; i < idx.size(); ++i) {
                                    A.grad.row(idx[i]) += self.grad.row(static_cast<Index>(i));
                                  }
                                });
}

namespace {

template <typename Scalar>
void softmax_backward(NodeT<Scalar>& self) {
  auto& A = *self.inputs[0];
  const auto& y = self.value;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = self.grad.cwiseProduct(y).rowwise().sum();
  Matrix<Scalar> g = y.cwiseProduct(self.grad);
  g -= (y.array().colwise() * dot.array()).matrix();
  A.accumulate(g);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& scores) {
  const auto& s = scores.value();
  Matrix<Scalar> out(s.rows(), s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    const Scalar m = s.row(i).maxCoeff();
    out.row(i) = (s.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return detail::record<Scalar>(std::move(out), scores.shape(), {scores},
                                &softmax_backward<Scalar>);
}

template <typename Scalar>
Tensor<Scalar> masked_softmax_rows(const Tensor<Scalar>& scores, const Mask& mask) {
  const auto& s = scores.value();
  if (mask.rows() != s.rows() || mask.cols() != s.cols()) {
    throw ShapeError("masked_softmax_rows: mask " + std::to_string(mask.rows()) + "x" +
                     std::to_string(mask.cols()) + " vs scores " + to_string(scores.shape()));
  }
  Matrix<Scalar> out = Matrix<Scalar>::Zero(s.rows(), s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < s.cols(); ++j) {
      if (mask(i, j) != 0) m = std::max(m, s(i, j));
    }
    if (m == -std::numeric_limits<Scalar>::infinity()) continue;  // nothing allowed
    Scalar total = 0;
    for (Index j = 0; j < s.cols(); ++j) {
      if (mask(i, j) != 0) {
        out(i, j) = std::exp(s(i, j) - m);
        total += out(i, j);
      }
    }
    out.row(i) /= total;
  }
  // Masked entries of the output are zero, so the softmax Jacobian already
  // sends them (and all-masked rows) zero gradient.
  return detail::record<Scalar>(std::move(out), scores.shape(), {scores},
                                &softmax_backward<Scalar>);
}

template <typename Scalar>
Tensor<Scalar> logsumexp_rows(const Tensor<Scalar>& rows) {
  const auto& x = rows.value();
  if (x.rows() == 0) throw ShapeError("logsumexp_rows: needs at least one row");
  const RowVector<Scalar> mx = x.colwise().maxCoeff();
  const Matrix<Scalar> shifted_exp = (x.rowwise() - mx).array().exp().matrix();
  const RowVector<Scalar> total = shifted_exp.colwise().sum();
  Matrix<Scalar> out = (mx.array() + total.array().log()).matrix();
  Matrix<Scalar> weights = (shifted_exp.array().rowwise() / total.array()).matrix();
  return detail::record<Scalar>(
      std::move(out), Shape{x.cols()}, {rows},
      [weights = std::move(weights)](NodeT<Scalar>& self) {
        auto& A = *self.inputs[0];
        A.accumulate((weights.array().rowwise() * self.grad.row(0).array()).matrix());
      });
}

template <typename Scalar>
Tensor<Scalar> mean_rows(const Tensor<Scalar>& rows) {
  const auto& x = rows.value();
  if (x.rows() == 0) throw ShapeError("mean_rows: needs at least one row");
  Matrix<Scalar> out = x.colwise().mean();
  const Index n = x.rows();
  return detail::record<Scalar>(std::move(out), Shape{x.cols()}, {rows},
                                [n](NodeT<Scalar>& self) {
                                  auto& A = *self.inputs[0];
                                  A.accumulate(self.grad.row(0).replicate(n, 1) / Scalar(n));
                                });
}

template <typename Scalar>
Tensor<Scalar> layer_norm_rows(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                               const Tensor<Scalar>& bias, Scalar epsilon) {
  const auto& v = x.value();
  const Index d = v.cols();
  if (gain.size() != d) mismatch("layer_norm_rows", x, gain);
  if (bias.size() != d) mismatch("layer_norm_rows", x, bias);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mu = v.rowwise().mean();
  Matrix<Scalar> centered = v.colwise() - mu;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std =
      ((centered.array().square().rowwise().sum() / Scalar(d)) + epsilon).rsqrt().matrix();
  Matrix<Scalar> xhat = (centered.array().colwise() * inv_std.array()).matrix();
  const RowVector<Scalar> g = Eigen::Map<const RowVector<Scalar>>(gain.value().data(), d);
  const RowVector<Scalar> b = Eigen::Map<const RowVector<Scalar>>(bias.value().data(), d);
  Matrix<Scalar> out = ((xhat.array().rowwise() * g.array()).rowwise() + b.array()).matrix();
  return detail::record<Scalar>(
      std::move(out), x.shape(), {x, gain, bias},
      [xhat = std::move(xhat), inv_std, g, d](NodeT<Scalar>& self) {
        auto& X = *self.inputs[0];
        auto& G = *self.inputs[1];
        auto& B = *self.inputs[2];
        const auto& dy = self.grad;
        if (G.requires_grad) {
          RowVector<Scalar> dg = dy.cwiseProduct(xhat).colwise().sum();
          G.accumulate(Eigen::Map<const Matrix<Scalar>>(dg.data(), G.value.rows(), G.value.cols()));
        }
        if (B.requires_grad) {
          RowVector<Scalar> db = dy.colwise().sum();
          B.accumulate(Eigen::Map<const Matrix<Scalar>>(db.data(), B.value.rows(), B.value.cols()));
        }
        if (X.requires_grad) {
          const Matrix<Scalar> dxhat = (dy.array().rowwise() * g.array()).matrix();
          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m1 = dxhat.rowwise().mean();
          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m2 =
              dxhat.cwiseProduct(xhat).rowwise().mean();
          Matrix<Scalar> dx = dxhat;
          dx.colwise() -= m1;
          dx -= (xhat.array().colwise() * m2.array()).matrix();
          dx = (dx.array().colwise() * inv_std.array()).matrix();
          X.accumulate(dx);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, Scalar rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= Scalar(0) && rate < Scalar(1))) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == Scalar(0)) return x;
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - rate);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix<Scalar> keep(x.rows(), x.cols());
  for (Index i = 0; i < keep.size(); ++i) {
    keep.data()[i] = uniform(rng) >= static_cast<double>(rate) ? keep_scale : Scalar(0);
  }
  Matrix<Scalar> out = x.value().cwiseProduct(keep);
  return detail::record<Scalar>(std::move(out), x.shape(), {x},
                                [keep = std::move(keep)](NodeT<Scalar>& self) {
                                  self.inputs[0]->accumulate(self.grad.cwiseProduct(keep));
                                });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::record<Scalar>(std::move(out), Shape{}, {a}, [](NodeT<Scalar>& self) {
    auto& A = *self.inputs[0];
    A.accumulate(Matrix<Scalar>::Constant(A.value.rows(), A.value.cols(), self.grad(0, 0)));
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), Scalar(1) / Scalar(a.size()));
}

template <typename Scalar>
Tensor<Scalar> bilinear(const Tensor<Scalar>& zs, const Tensor<Scalar>& weight,
                        const Tensor<Scalar>& zo) {
  const Index k = zs.cols();
  if (zo.rows() != zs.rows() || zo.cols() != k) mismatch("bilinear", zs, zo);
  if (weight.rank() != 3 || weight.shape()[1] != k || weight.shape()[2] != k) {
    mismatch("bilinear", zs, weight);
  }
  const Index relations = weight.shape()[0];
  const Index pairs = zs.rows();
  // projected[p, r*k + i] = sum_j W[r, i, j] * zo[p, j]
  Matrix<Scalar> projected = zo.value() * weight.value().transpose();
  Matrix<Scalar> out(pairs, relations);
  for (Index r = 0; r < relations; ++r) {
    out.col(r) = projected.middleCols(r * k, k).cwiseProduct(zs.value()).rowwise().sum();
  }
  return detail::record<Scalar>(
      std::move(out), Shape{pairs, relations}, {zs, weight, zo},
      [projected = std::move(projected), k, relations](NodeT<Scalar>& self) {
        auto& ZS = *self.inputs[0];
        auto& W = *self.inputs[1];
        auto& ZO = *self.inputs[2];
        const auto& dout = self.grad;
        if (ZS.requires_grad) {
          Matrix<Scalar> dzs = Matrix<Scalar>::Zero(ZS.value.rows(), k);
          for (Index r = 0; r < relations; ++r) {
            dzs += (projected.middleCols(r * k, k).array().colwise() * dout.col(r).array()).matrix();
          }
          ZS.accumulate(dzs);
        }
        if (W.requires_grad || ZO.requires_grad) {
          Matrix<Scalar> dproj(ZS.value.rows(), relations * k);
          for (Index r = 0; r < relations; ++r) {
            dproj.middleCols(r * k, k) =
                (ZS.value.array().colwise() * dout.col(r).array()).matrix();
          }
          if (W.requires_grad) W.accumulate(dproj.transpose() * ZO.value);
          if (ZO.requires_grad) ZO.accumulate(dproj * W.value);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> atl_loss(const Tensor<Scalar>& logits,
                        const std::vector<std::vector<Index>>& positives) {
  const Index pairs = logits.rows();
  const Index total = logits.cols();
  if (total < 1) throw ShapeError("atl_loss: logits need a threshold column");
  if (static_cast<Index>(positives.size()) != pairs) {
    throw ShapeError("atl_loss: " + std::to_string(positives.size()) +
                     " positive sets for " + std::to_string(pairs) + " logit rows");
  }
  if (pairs == 0) throw ShapeError("atl_loss: no logit rows");
  const Index th = total - 1;
  const auto& z = logits.value();
  Matrix<Scalar> dz = Matrix<Scalar>::Zero(pairs, total);
  Scalar loss = 0;
  std::vector<char> is_pos(static_cast<std::size_t>(total));
  for (Index p = 0; p < pairs; ++p) {
    std::fill(is_pos.begin(), is_pos.end(), 0);
    for (Index r : positives[p]) {
      if (r == th) throw std::invalid_argument("atl_loss: positive set contains the TH class");
      if (r < 0 || r >= th) {
        throw std::invalid_argument("atl_loss: relation index " + std::to_string(r) +
                                    " out of range");
      }
      is_pos[r] = 1;
    }
    const Scalar t = z(p, th);
    // L1: each positive against TH alone.
    for (Index r = 0; r < th; ++r) {
      if (!is_pos[r]) continue;
      const Scalar gap = t - z(p, r);
      const Scalar softplus = gap > 0 ? gap + std::log1p(std::exp(-gap)) : std::log1p(std::exp(gap));
      loss += softplus;
      const Scalar s = gap >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-gap))
                                : std::exp(gap) / (Scalar(1) + std::exp(gap));
      dz(p, r) -= s;
      dz(p, th) += s;
    }
    // L2: TH against all negatives.
    Scalar mx = t;
    for (Index r = 0; r < th; ++r) {
      if (!is_pos[r]) mx = std::max(mx, z(p, r));
    }
    Scalar denom = std::exp(t - mx);
    for (Index r = 0; r < th; ++r) {
      if (!is_pos[r]) denom += std::exp(z(p, r) - mx);
    }
    loss += mx + std::log(denom) - t;
    for (Index r = 0; r < th; ++r) {
      if (!is_pos[r]) dz(p, r) += std::exp(z(p, r) - mx) / denom;
    }
    dz(p, th) += std::exp(t - mx) / denom - Scalar(1);
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = loss / Scalar(pairs);
  dz /= Scalar(pairs);
  return detail::record<Scalar>(std::move(out), Shape{}, {logits},
                                [dz = std::move(dz)](NodeT<Scalar>& self) {
                                  self.inputs[0]->accumulate(dz * self.grad(0, 0));
                                });
}

#define NCDRE_INSTANTIATE_OPS(S)                                                              \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> matmul_nt(const Tensor<S>&, const Tensor<S>&);                           \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                 \
  template Tensor<S> scale(const Tensor<S>&, S);                                              \
  template Tensor<S> tanh(const Tensor<S>&);                                                  \
  template Tensor<S> sigmoid(const Tensor<S>&);                                               \
  template Tensor<S> relu(const Tensor<S>&);                                                  \
  template Tensor<S> concat_cols(const std::vector<Tensor<S>>&);                              \
  template Tensor<S> concat_rows(const std::vector<Tensor<S>>&);                              \
  template Tensor<S> slice_cols(const Tensor<S>&, Index, Index);                              \
  template Tensor<S> slice_rows(const Tensor<S>&, Index, Index);                              \
  template Tensor<S> gather_rows(const Tensor<S>&, std::span<const Index>);                   \
  template Tensor<S> softmax_rows(const Tensor<S>&);                                          \
  template Tensor<S> masked_softmax_rows(const Tensor<S>&, const Mask&);                      \
  template Tensor<S> logsumexp_rows(const Tensor<S>&);                                        \
  template Tensor<S> mean_rows(const Tensor<S>&);                                             \
  template Tensor<S> layer_norm_rows(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S); \
  template Tensor<S> dropout(const Tensor<S>&, S, bool, std::mt19937_64&);                    \
  template Tensor<S> sum(const Tensor<S>&);                                                   \
  template Tensor<S> mean(const Tensor<S>&);                                                  \
  template Tensor<S> bilinear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);          \
  template Tensor<S> atl_loss(const Tensor<S>&, const std::vector<std::vector<Index>>&);

NCDRE_INSTANTIATE_OPS(double)
NCDRE_INSTANTIATE_OPS(float)

#undef NCDRE_INSTANTIATE_OPS

}  // namespace ncdre
