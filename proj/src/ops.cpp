#include "nial/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace nial {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

// Active tape, but only if some input participates in differentiation.
GradTape* recording(std::initializer_list<const Tensor*> inputs) {
  GradTape* tape = GradTape::active();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// outer/inner decomposition for per-axis slice iteration
struct AxisSplit {
  Index outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, Index axis) {
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (Index i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (Index i = axis + 1; i < static_cast<Index>(shape.size()); ++i) {
    s.inner *= shape[static_cast<std::size_t>(i)];
  }
  return s;
}

Array swap_axes_raw(const Array& src, const Shape& in_shape, Index d0, Index d1) {
  const Index rank = static_cast<Index>(in_shape.size());
  Shape out_shape = in_shape;
  std::swap(out_shape[static_cast<std::size_t>(d0)], out_shape[static_cast<std::size_t>(d1)]);

  std::vector<Index> in_strides(in_shape.size()), out_strides(in_shape.size());
  Index acc = 1;
  for (Index i = rank - 1; i >= 0; --i) {
    in_strides[static_cast<std::size_t>(i)] = acc;
    acc *= in_shape[static_cast<std::size_t>(i)];
  }
  acc = 1;
  for (Index i = rank - 1; i >= 0; --i) {
    out_strides[static_cast<std::size_t>(i)] = acc;
    acc *= out_shape[static_cast<std::size_t>(i)];
  }

  Array dst(src.size());
  std::vector<Index> idx(in_shape.size(), 0);
  for (Index flat = 0; flat < src.size(); ++flat) {
    Index rem = flat;
    Index out_flat = 0;
    for (Index i = 0; i < rank; ++i) {
      idx[static_cast<std::size_t>(i)] = rem / in_strides[static_cast<std::size_t>(i)];
      rem %= in_strides[static_cast<std::size_t>(i)];
    }
    std::swap(idx[static_cast<std::size_t>(d0)], idx[static_cast<std::size_t>(d1)]);
    for (Index i = 0; i < rank; ++i) {
      out_flat += idx[static_cast<std::size_t>(i)] * out_strides[static_cast<std::size_t>(i)];
    }
    dst[out_flat] = src[flat];
  }
  return dst;
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  out.values() = a.values() + b.values();
  if (GradTape* tape = recording({&a, &b})) {
    out.set_requires_grad(true);
    auto ad = a.data(), bd = b.data(), od = out.data();
    tape->record({{ad, bd}, od, [ad, bd, od] {
                    ad->adjoint += od->adjoint;
                    bd->adjoint += od->adjoint;
                  }});
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  out.values() = a.values() * b.values();
  if (GradTape* tape = recording({&a, &b})) {
    out.set_requires_grad(true);
    auto ad = a.data(), bd = b.data(), od = out.data();
    tape->record({{ad, bd}, od, [ad, bd, od] {
                    ad->adjoint += od->adjoint * bd->values;
                    bd->adjoint += od->adjoint * ad->values;
                  }});
  }
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  out.values() = x.values() * c;
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od, c] { xd->adjoint += od->adjoint * c; }});
  }
  return out;
}

Tensor add_bcast(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  bool suffix = bs.size() <= as.size();
  if (suffix) {
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (bs[bs.size() - 1 - i] != as[as.size() - 1 - i]) {
        suffix = false;
        break;
      }
    }
  }
  if (!suffix) {
    throw DimensionError("add_bcast: " + shape_str(bs) + " is not a trailing suffix of " +
                         shape_str(as));
  }
  const Index nb = numel(bs);
  const Index lead = numel(as) / nb;

  Tensor out = Tensor::zeros(as);
  MapRM o(out.values().data(), lead, nb);
  CMapRM av(a.values().data(), lead, nb);
  Eigen::Map<const Eigen::RowVectorXd> bv(b.values().data(), nb);
  o = av.rowwise() + bv;

  if (GradTape* tape = recording({&a, &b})) {
    out.set_requires_grad(true);
    auto ad = a.data(), bd = b.data(), od = out.data();
    tape->record({{ad, bd}, od, [ad, bd, od, lead, nb] {
                    ad->adjoint += od->adjoint;
                    CMapRM dout(od->adjoint.data(), lead, nb);
                    Eigen::Map<Eigen::RowVectorXd> dbv(bd->adjoint.data(), nb);
                    dbv += dout.colwise().sum();
                  }});
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  out.values() = x.values().max(0.0);
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od] {
                    xd->adjoint += (xd->values > 0.0).cast<double>() * od->adjoint;
                  }});
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const Array& xv = x.values();
  Array& ov = out.values();
  for (Index i = 0; i < xv.size(); ++i) ov[i] = stable_sigmoid(xv[i]);
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od] {
                    xd->adjoint += od->adjoint * od->values * (1.0 - od->values);
                  }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (numel(new_shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
  }
  Tensor out = Tensor::zeros(std::move(new_shape));
  out.values() = x.values();
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od] { xd->adjoint += od->adjoint; }});
  }
  return out;
}

Tensor transpose(const Tensor& x, Index axis0, Index axis1) {
  const Index rank = x.rank();
  if (axis0 < 0 || axis0 >= rank || axis1 < 0 || axis1 >= rank || axis0 == axis1) {
    throw ContractError("transpose: bad axes (" + std::to_string(axis0) + "," +
                        std::to_string(axis1) + ") for " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  std::swap(out_shape[static_cast<std::size_t>(axis0)], out_shape[static_cast<std::size_t>(axis1)]);
  Tensor out = Tensor::zeros(out_shape);
  out.values() = swap_axes_raw(x.values(), x.shape(), axis0, axis1);
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od, axis0, axis1] {
                    xd->adjoint += swap_axes_raw(od->adjoint, od->shape, axis0, axis1);
                  }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// contractions
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  CMapRM av(a.values().data(), m, k);
  CMapRM bv(b.values().data(), k, n);
  MapRM ov(out.values().data(), m, n);
  ov.noalias() = av * bv;

  if (GradTape* tape = recording({&a, &b})) {
    out.set_requires_grad(true);
    auto ad = a.data(), bd = b.data(), od = out.data();
    tape->record({{ad, bd}, od, [ad, bd, od, m, k, n] {
                    CMapRM dc(od->adjoint.data(), m, n);
                    CMapRM avb(ad->values.data(), m, k);
                    CMapRM bvb(bd->values.data(), k, n);
                    MapRM da(ad->adjoint.data(), m, k);
                    MapRM db(bd->adjoint.data(), k, n);
                    da.noalias() += dc * bvb.transpose();
                    db.noalias() += avb.transpose() * dc;
                  }});
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() < 3 || a.rank() != b.rank()) {
    throw DimensionError("bmm: need equal ranks >= 3, got " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const Index rank = a.rank();
  Index batch = 1;
  for (Index i = 0; i < rank - 2; ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw DimensionError("bmm: leading dims disagree: " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()));
    }
    batch *= a.dim(i);
  }
  const Index m = a.dim(rank - 2), k = a.dim(rank - 1), n = b.dim(rank - 1);
  if (b.dim(rank - 2) != k) {
    throw DimensionError("bmm: inner dims disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  Tensor out = Tensor::zeros(out_shape);
  for (Index s = 0; s < batch; ++s) {
    CMapRM av(a.values().data() + s * m * k, m, k);
    CMapRM bv(b.values().data() + s * k * n, k, n);
    MapRM ov(out.values().data() + s * m * n, m, n);
    ov.noalias() = av * bv;
  }

  if (GradTape* tape = recording({&a, &b})) {
    out.set_requires_grad(true);
    auto ad = a.data(), bd = b.data(), od = out.data();
    tape->record({{ad, bd}, od, [ad, bd, od, batch, m, k, n] {
                    for (Index s = 0; s < batch; ++s) {
                      CMapRM dc(od->adjoint.data() + s * m * n, m, n);
                      CMapRM av(ad->values.data() + s * m * k, m, k);
                      CMapRM bv(bd->values.data() + s * k * n, k, n);
                      MapRM da(ad->adjoint.data() + s * m * k, m, k);
                      MapRM db(bd->adjoint.data() + s * k * n, k, n);
                      da.noalias() += dc * bv.transpose();
                      db.noalias() += av.transpose() * dc;
                    }
                  }});
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 2 || w.rank() != 2 || b.rank() != 1 || x.dim(x.rank() - 1) != w.dim(0) ||
      w.dim(1) != b.dim(0)) {
    throw DimensionError("linear: incompatible shapes x=" + shape_str(x.shape()) +
                         " w=" + shape_str(w.shape()) + " b=" + shape_str(b.shape()));
  }
  if (x.rank() == 2) return add_bcast(matmul(x, w), b);
  const Index in = w.dim(0);
  Shape out_shape = x.shape();
  out_shape.back() = w.dim(1);
  Tensor flat = reshape(x, {x.size() / in, in});
  return reshape(add_bcast(matmul(flat, w), b), std::move(out_shape));
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::zeros({1});
  out.values()[0] = x.values().sum();
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od] { xd->adjoint += od->adjoint[0]; }});
  }
  return out;
}

Tensor mean_axis(const Tensor& x, Index axis) {
  if (axis < 0 || axis >= x.rank()) {
    throw ContractError("mean_axis: axis " + std::to_string(axis) + " invalid for " +
                        shape_str(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  Shape out_shape;
  for (Index i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape = {1};

  Tensor out = Tensor::zeros(out_shape);
  const Array& xv = x.values();
  Array& ov = out.values();
  const double inv_n = 1.0 / static_cast<double>(sp.n);
  for (Index o = 0; o < sp.outer; ++o) {
    for (Index in = 0; in < sp.inner; ++in) {
      double acc = 0.0;
      for (Index j = 0; j < sp.n; ++j) acc += xv[(o * sp.n + j) * sp.inner + in];
      ov[o * sp.inner + in] = acc * inv_n;
    }
  }
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od, sp, inv_n] {
                    for (Index o = 0; o < sp.outer; ++o) {
                      for (Index in = 0; in < sp.inner; ++in) {
                        const double g = od->adjoint[o * sp.inner + in] * inv_n;
                        for (Index j = 0; j < sp.n; ++j) {
                          xd->adjoint[(o * sp.n + j) * sp.inner + in] += g;
                        }
                      }
                    }
                  }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// neural-net primitives
// ---------------------------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, Index stride,
              Index padding) {
  if (x.rank() != 3 || w.rank() != 3 || bias.rank() != 1) {
    throw DimensionError("conv1d: want x rank 3, w rank 3, bias rank 1; got x=" +
                         shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                         " bias=" + shape_str(bias.shape()));
  }
  const Index b = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const Index cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin || bias.dim(0) != cout) {
    throw DimensionError("conv1d: channel mismatch: x=" + shape_str(x.shape()) +
                         " w=" + shape_str(w.shape()) + " bias=" + shape_str(bias.shape()));
  }
  if (stride < 1 || padding < 0) {
    throw ContractError("conv1d: stride must be >= 1 and padding >= 0");
  }
  if (k > len + 2 * padding) {
    throw DimensionError("conv1d: kernel " + std::to_string(k) + " larger than padded input " +
                         std::to_string(len + 2 * padding));
  }
  const Index lout = (len + 2 * padding - k) / stride + 1;

  Tensor out = Tensor::zeros({b, cout, lout});
  const Array& xv = x.values();
  const Array& wv = w.values();
  const Array& bv = bias.values();
  Array& ov = out.values();
  for (Index bi = 0; bi < b; ++bi) {
    for (Index co = 0; co < cout; ++co) {
      for (Index t = 0; t < lout; ++t) {
        const Index x0 = t * stride - padding;
        const Index kmin = std::max<Index>(0, -x0);
        const Index kmax = std::min<Index>(k, len - x0);
        double acc = bv[co];
        for (Index ci = 0; ci < cin; ++ci) {
          const double* xrow = xv.data() + (bi * cin + ci) * len;
          const double* wrow = wv.data() + (co * cin + ci) * k;
          for (Index kk = kmin; kk < kmax; ++kk) acc += xrow[x0 + kk] * wrow[kk];
        }
        ov[(bi * cout + co) * lout + t] = acc;
      }
    }
  }

  if (GradTape* tape = recording({&x, &w, &bias})) {
    out.set_requires_grad(true);
    auto xd = x.data(), wd = w.data(), bd = bias.data(), od = out.data();
    tape->record(
        {{xd, wd, bd}, od, [xd, wd, bd, od, b, cin, len, cout, k, lout, stride, padding] {
           const Array& dy = od->adjoint;
           for (Index bi = 0; bi < b; ++bi) {
             for (Index co = 0; co < cout; ++co) {
               for (Index t = 0; t < lout; ++t) {
                 const double g = dy[(bi * cout + co) * lout + t];
                 bd->adjoint[co] += g;
                 const Index x0 = t * stride - padding;
                 const Index kmin = std::max<Index>(0, -x0);
                 const Index kmax = std::min<Index>(k, len - x0);
                 for (Index ci = 0; ci < cin; ++ci) {
                   const double* xrow = xd->values.data() + (bi * cin + ci) * len;
                   const double* wrow = wd->values.data() + (co * cin + ci) * k;
                   double* dxrow = xd->adjoint.data() + (bi * cin + ci) * len;
                   double* dwrow = wd->adjoint.data() + (co * cin + ci) * k;
                   for (Index kk = kmin; kk < kmax; ++kk) {
                     dwrow[kk] += g * xrow[x0 + kk];
                     dxrow[x0 + kk] += g * wrow[kk];
                   }
                 }
               }
             }
           }
         }});
  }
  return out;
}

Tensor maxpool1d(const Tensor& x, Index window, Index stride) {
  if (x.rank() != 3) {
    throw DimensionError("maxpool1d: want rank 3, got " + shape_str(x.shape()));
  }
  const Index b = x.dim(0), c = x.dim(1), len = x.dim(2);
  if (window < 1 || stride < 1) {
    throw ContractError("maxpool1d: window and stride must be >= 1");
  }
  if (window > len) {
    throw DimensionError("maxpool1d: window " + std::to_string(window) +
                         " larger than input length " + std::to_string(len));
  }
  const Index lout = (len - window) / stride + 1;

  Tensor out = Tensor::zeros({b, c, lout});
  const Array& xv = x.values();
  Array& ov = out.values();
  std::vector<Index> argmax(static_cast<std::size_t>(b * c * lout));
  for (Index bc = 0; bc < b * c; ++bc) {
    for (Index t = 0; t < lout; ++t) {
      const Index base = bc * len + t * stride;
      Index best = base;
      for (Index kk = 1; kk < window; ++kk) {
        if (xv[base + kk] > xv[best]) best = base + kk;  // strict: first max wins ties
      }
      const Index oi = bc * lout + t;
      ov[oi] = xv[best];
      argmax[static_cast<std::size_t>(oi)] = best;
    }
  }

  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od, argmax = std::move(argmax)] {
                    for (Index i = 0; i < od->adjoint.size(); ++i) {
                      xd->adjoint[argmax[static_cast<std::size_t>(i)]] += od->adjoint[i];
                    }
                  }});
  }
  return out;
}

Tensor softmax(const Tensor& x, Index axis) {
  if (axis < 0 || axis >= x.rank()) {
    throw ContractError("softmax: axis " + std::to_string(axis) + " invalid for " +
                        shape_str(x.shape()));
  }
  const AxisSplit sp = split_axis(x.shape(), axis);
  Tensor out = Tensor::zeros(x.shape());
  const Array& xv = x.values();
  Array& yv = out.values();
  for (Index o = 0; o < sp.outer; ++o) {
    for (Index in = 0; in < sp.inner; ++in) {
      const Index base = o * sp.n * sp.inner + in;
      double m = xv[base];
      for (Index j = 1; j < sp.n; ++j) m = std::max(m, xv[base + j * sp.inner]);
      double denom = 0.0;
      for (Index j = 0; j < sp.n; ++j) {
        const double e = std::exp(xv[base + j * sp.inner] - m);
        yv[base + j * sp.inner] = e;
        denom += e;
      }
      for (Index j = 0; j < sp.n; ++j) yv[base + j * sp.inner] /= denom;
    }
  }

  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od, sp] {
                    const Array& y = od->values;
                    const Array& dy = od->adjoint;
                    for (Index o = 0; o < sp.outer; ++o) {
                      for (Index in = 0; in < sp.inner; ++in) {
                        const Index base = o * sp.n * sp.inner + in;
                        double dot = 0.0;
                        for (Index j = 0; j < sp.n; ++j) {
                          const Index idx = base + j * sp.inner;
                          dot += dy[idx] * y[idx];
                        }
                        for (Index j = 0; j < sp.n; ++j) {
                          const Index idx = base + j * sp.inner;
                          xd->adjoint[idx] += y[idx] * (dy[idx] - dot);
                        }
                      }
                    }
                  }});
  }
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1 || gamma.rank() != 1 || beta.rank() != 1) {
    throw DimensionError("layernorm: want x rank >= 1 and rank-1 gamma/beta");
  }
  const Index d = x.dim(x.rank() - 1);
  if (gamma.dim(0) != d || beta.dim(0) != d) {
    throw DimensionError("layernorm: last dim " + std::to_string(d) + " of " +
                         shape_str(x.shape()) + " does not match gamma " +
                         shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()));
  }
  const Index slices = x.size() / d;

  Tensor out = Tensor::zeros(x.shape());
  const Array& xv = x.values();
  const Array& gv = gamma.values();
  const Array& bv = beta.values();
  Array& yv = out.values();
  Array xhat(x.size());
  Array inv_std(slices);
  for (Index s = 0; s < slices; ++s) {
    const Index base = s * d;
    double mean = 0.0;
    for (Index j = 0; j < d; ++j) mean += xv[base + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double c = xv[base + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[s] = inv;
    for (Index j = 0; j < d; ++j) {
      const double h = (xv[base + j] - mean) * inv;
      xhat[base + j] = h;
      yv[base + j] = gv[j] * h + bv[j];
    }
  }

  if (GradTape* tape = recording({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xd = x.data(), gd = gamma.data(), bd = beta.data(), od = out.data();
    tape->record({{xd, gd, bd},
                  od,
                  [xd, gd, bd, od, d, slices, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)] {
                    const Array& dy = od->adjoint;
                    for (Index s = 0; s < slices; ++s) {
                      const Index base = s * d;
                      double m1 = 0.0, m2 = 0.0;
                      for (Index j = 0; j < d; ++j) {
                        const double dxh = dy[base + j] * gd->values[j];
                        m1 += dxh;
                        m2 += dxh * xhat[base + j];
                        gd->adjoint[j] += dy[base + j] * xhat[base + j];
                        bd->adjoint[j] += dy[base + j];
                      }
                      m1 /= static_cast<double>(d);
                      m2 /= static_cast<double>(d);
                      for (Index j = 0; j < d; ++j) {
                        const double dxh = dy[base + j] * gd->values[j];
                        xd->adjoint[base + j] +=
                            inv_std[s] * (dxh - m1 - xhat[base + j] * m2);
                      }
                    }
                  }});
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) {
    throw ContractError("dropout: p must be in [0,1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;

  const double keep_scale = 1.0 / (1.0 - p);
  Array mask(x.size());
  for (Index i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform01() < p ? 0.0 : keep_scale;
  }
  Tensor out = Tensor::zeros(x.shape());
  out.values() = x.values() * mask;
  if (GradTape* tape = recording({&x})) {
    out.set_requires_grad(true);
    auto xd = x.data(), od = out.data();
    tape->record({{xd}, od, [xd, od, mask = std::move(mask)] {
                    xd->adjoint += od->adjoint * mask;
                  }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

Tensor categorical_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw DimensionError("categorical_cross_entropy: want logits [BxK], got " +
                         shape_str(logits.shape()));
  }
  const Index b = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(labels.size()) != b) {
    throw ContractError("categorical_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for batch of " + std::to_string(b));
  }
  for (Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) {
      throw LabelError("label " + std::to_string(y) + " out of range [0," + std::to_string(k) +
                       ") at row " + std::to_string(i));
    }
  }

  const Array& zv = logits.values();
  Array probs(b * k);
  double loss = 0.0;
  for (Index i = 0; i < b; ++i) {
    const Index base = i * k;
    double m = zv[base];
    for (Index j = 1; j < k; ++j) m = std::max(m, zv[base + j]);
    double denom = 0.0;
    for (Index j = 0; j < k; ++j) {
      const double e = std::exp(zv[base + j] - m);
      probs[base + j] = e;
      denom += e;
    }
    for (Index j = 0; j < k; ++j) probs[base + j] /= denom;
    const double lse = m + std::log(denom);
    loss += lse - zv[base + labels[static_cast<std::size_t>(i)]];
  }
  loss /= static_cast<double>(b);

  Tensor out = Tensor::zeros({1});
  out.values()[0] = loss;
  if (GradTape* tape = recording({&logits})) {
    out.set_requires_grad(true);
    auto zd = logits.data(), od = out.data();
    tape->record({{zd}, od, [zd, od, b, k, labels, probs = std::move(probs)] {
                    const double g = od->adjoint[0] / static_cast<double>(b);
                    for (Index i = 0; i < b; ++i) {
                      const Index base = i * k;
                      const int y = labels[static_cast<std::size_t>(i)];
                      for (Index j = 0; j < k; ++j) {
                        const double onehot = (j == y) ? 1.0 : 0.0;
                        zd->adjoint[base + j] += g * (probs[base + j] - onehot);
                      }
                    }
                  }});
  }
  return out;
}

Tensor binary_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const bool shape_ok =
      logits.rank() == 1 || (logits.rank() == 2 && logits.dim(1) == 1);
  if (!shape_ok) {
    throw DimensionError("binary_cross_entropy: want logits [Bx1] or [B], got " +
                         shape_str(logits.shape()));
  }
  const Index b = logits.dim(0);
  if (static_cast<Index>(labels.size()) != b) {
    throw ContractError("binary_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for batch of " + std::to_string(b));
  }
  for (Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) {
      throw LabelError("label must be 0 or 1, got " + std::to_string(y) + " at row " +
                       std::to_string(i));
    }
  }

  const Array& zv = logits.values();
  double loss = 0.0;
  for (Index i = 0; i < b; ++i) {
    const double z = zv[i];
    const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
    // max(z,0) - z*y + log(1 + exp(-|z|)): the overflow-free form
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(b);

  Tensor out = Tensor::zeros({1});
  out.values()[0] = loss;
  if (GradTape* tape = recording({&logits})) {
    out.set_requires_grad(true);
    auto zd = logits.data(), od = out.data();
    tape->record({{zd}, od, [zd, od, b, labels] {
                    const double g = od->adjoint[0] / static_cast<double>(b);
                    for (Index i = 0; i < b; ++i) {
                      const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
                      zd->adjoint[i] += g * (stable_sigmoid(zd->values[i]) - y);
                    }
                  }});
  }
  return out;
}

}  // namespace nial
