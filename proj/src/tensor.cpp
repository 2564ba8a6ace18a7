#include "phifno/tensor.hpp"

#include <cmath>
#include <cstring>

#include "phifno/errors.hpp"

namespace phifno::ad {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->tracked()) continue;
    if (!tape)
      tape = t->tape();
    else
      require(tape == t->tape(), "tensor: operands recorded on different tapes");
  }
  return tape;
}

int parent_id(const Tensor& t) { return t.tracked() ? t.node() : -1; }

int reflect_index(int t, int n) {
  if (t < 0) return -t;
  if (t >= n) return 2 * (n - 1) - t;
  return t;
}

}  // namespace

Tensor Tensor::constant(const Shape& s, std::vector<double> values) {
  require(static_cast<int64_t>(values.size()) == s.numel(),
          "tensor: value count does not match shape");
  Tensor t;
  t.shape_ = s;
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  return t;
}

Tensor record_op(Tape* tape, const Shape& out_shape, std::vector<double> values,
                 std::function<void(Tape&, int)> vjp) {
  require(static_cast<int64_t>(values.size()) == out_shape.numel(),
          "tensor: value count does not match shape");
  if (!tape) return Tensor::constant(out_shape, std::move(values));
  Tensor t;
  t.shape_ = out_shape;
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  t.tape_ = tape;
  tape->nodes_.push_back(Tape::Node{out_shape, std::move(vjp), {}, false});
  t.node_ = static_cast<int>(tape->nodes_.size()) - 1;
  return t;
}

Tensor Tape::leaf(const Shape& s, std::vector<double> values) {
  return record_op(this, s, std::move(values), {});
}

std::vector<double>& Tape::grad_buffer(int node) {
  Node& n = nodes_.at(node);
  if (!n.touched) {
    n.grad.assign(n.shape.numel(), 0.0);
    n.touched = true;
  }
  return n.grad;
}

void Tape::backward(const Tensor& scalar) {
  require(scalar.tracked() && scalar.tape() == this,
          "backward: seed is not recorded on this tape");
  require(scalar.numel() == 1, "backward: seed must hold a single element");
  grad_buffer(scalar.node())[0] += 1.0;
  for (int id = scalar.node(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.touched && n.vjp) n.vjp(*this, id);
  }
}

const std::vector<double>& Tape::grad(const Tensor& t) {
  require(t.tracked() && t.tape() == this, "grad: tensor is not on this tape");
  return grad_buffer(t.node());  // zeros if backward never reached it
}

// ---- elementwise arithmetic ----

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (size_t k = 0; k < out.size(); ++k) out[k] += bv[k];
  int pa = parent_id(a), pb = parent_id(b);
  return record_op(common_tape({&a, &b}), a.shape(), std::move(out),
                   [pa, pb](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     if (pa >= 0) {
                       auto& ga = t.grad_buffer(pa);
                       for (size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                     }
                     if (pb >= 0) {
                       auto& gb = t.grad_buffer(pb);
                       for (size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
                     }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "sub: shape mismatch");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (size_t k = 0; k < out.size(); ++k) out[k] -= bv[k];
  int pa = parent_id(a), pb = parent_id(b);
  return record_op(common_tape({&a, &b}), a.shape(), std::move(out),
                   [pa, pb](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     if (pa >= 0) {
                       auto& ga = t.grad_buffer(pa);
                       for (size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                     }
                     if (pb >= 0) {
                       auto& gb = t.grad_buffer(pb);
                       for (size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
                     }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  std::vector<double> out(a.numel());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t k = 0; k < out.size(); ++k) out[k] = av[k] * bv[k];
  int pa = parent_id(a), pb = parent_id(b);
  auto sa = a.tracked() || b.tracked() ? std::make_shared<std::vector<double>>(av) : nullptr;
  auto sb = sa ? std::make_shared<std::vector<double>>(bv) : nullptr;
  return record_op(common_tape({&a, &b}), a.shape(), std::move(out),
                   [pa, pb, sa, sb](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     if (pa >= 0) {
                       auto& ga = t.grad_buffer(pa);
                       for (size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (*sb)[k];
                     }
                     if (pb >= 0) {
                       auto& gb = t.grad_buffer(pb);
                       for (size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * (*sa)[k];
                     }
                   });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= c;
  int pa = parent_id(a);
  return record_op(common_tape({&a}), a.shape(), std::move(out),
                   [pa, c](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& ga = t.grad_buffer(pa);
                     for (size_t k = 0; k < g.size(); ++k) ga[k] += c * g[k];
                   });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  int pa = parent_id(a);
  int64_t n = a.numel();
  return record_op(common_tape({&a}), Shape::scalar(), {s},
                   [pa, n](Tape& t, int self) {
                     double g = (*t.grad_if_touched(self))[0];
                     auto& ga = t.grad_buffer(pa);
                     for (int64_t k = 0; k < n; ++k) ga[k] += g;
                   });
}

Tensor sq_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  int pa = parent_id(a);
  auto sa = a.tracked() ? std::make_shared<std::vector<double>>(a.values()) : nullptr;
  return record_op(common_tape({&a}), Shape::scalar(), {s},
                   [pa, sa](Tape& t, int self) {
                     double g = (*t.grad_if_touched(self))[0];
                     auto& ga = t.grad_buffer(pa);
                     for (size_t k = 0; k < sa->size(); ++k) ga[k] += 2.0 * (*sa)[k] * g;
                   });
}

Tensor masked_sq_norm(const Tensor& x, const MaskStack& masks) {
  require(x.shape().rank == 4 && x.shape().d[1] == 1,
          "masked_sq_norm: expects a [b,1,x,y] tensor");
  const int b = x.shape().d[0], nx = x.shape().d[2], ny = x.shape().d[3];
  require(masks.nx == nx && masks.ny == ny && (masks.b == b || masks.b == 1),
          "masked_sq_norm: mask shape mismatch");
  std::vector<double> out(b, 0.0);
  const auto& xv = x.values();
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j)
        if (masks.at(bi, i, j)) {
          double v = xv[(static_cast<size_t>(bi) * nx + i) * ny + j];
          out[bi] += v * v;
        }
  int pa = parent_id(x);
  auto sx = x.tracked() ? std::make_shared<std::vector<double>>(xv) : nullptr;
  auto sm = std::make_shared<MaskStack>(masks);
  return record_op(common_tape({&x}), Shape::vec(b), std::move(out),
                   [pa, sx, sm, b, nx, ny](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& gx = t.grad_buffer(pa);
                     for (int bi = 0; bi < b; ++bi)
                       for (int i = 0; i < nx; ++i)
                         for (int j = 0; j < ny; ++j)
                           if (sm->at(bi, i, j)) {
                             size_t k = (static_cast<size_t>(bi) * nx + i) * ny + j;
                             gx[k] += 2.0 * (*sx)[k] * g[bi];
                           }
                   });
}

// ---- nonlinearity ----

Tensor gelu(const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t k = 0; k < xv.size(); ++k)
    out[k] = xv[k] * 0.5 * std::erfc(-xv[k] * kInvSqrt2);
  int pa = parent_id(x);
  auto sx = x.tracked() ? std::make_shared<std::vector<double>>(xv) : nullptr;
  return record_op(common_tape({&x}), x.shape(), std::move(out),
                   [pa, sx](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& gx = t.grad_buffer(pa);
                     for (size_t k = 0; k < g.size(); ++k) {
                       double v = (*sx)[k];
                       double cdf = 0.5 * std::erfc(-v * kInvSqrt2);
                       double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                       gx[k] += g[k] * (cdf + v * pdf);
                     }
                   });
}

// ---- channel mixing ----

Tensor pointwise_affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(x.shape().rank == 4, "pointwise_affine: input must be [b,c,x,y]");
  require(w.shape().rank == 2, "pointwise_affine: weight must be [c_out,c_in]");
  require(bias.shape().rank == 1, "pointwise_affine: bias must be [c_out]");
  const int b = x.shape().d[0], ci = x.shape().d[1];
  const int nx = x.shape().d[2], ny = x.shape().d[3];
  const int co = w.shape().d[0];
  require(w.shape().d[1] == ci && bias.shape().d[0] == co,
          "pointwise_affine: channel dimensions disagree");

  const int64_t np = static_cast<int64_t>(nx) * ny;
  const auto& xv = x.values();
  const auto& wv = w.values();
  const auto& bv = bias.values();
  std::vector<double> out(static_cast<size_t>(b) * co * np);
  for (int bi = 0; bi < b; ++bi)
    for (int o = 0; o < co; ++o) {
      double* dst = out.data() + (static_cast<size_t>(bi) * co + o) * np;
      for (int64_t p = 0; p < np; ++p) dst[p] = bv[o];
      for (int i = 0; i < ci; ++i) {
        const double wi = wv[static_cast<size_t>(o) * ci + i];
        const double* src = xv.data() + (static_cast<size_t>(bi) * ci + i) * np;
        for (int64_t p = 0; p < np; ++p) dst[p] += wi * src[p];
      }
    }

  int px = parent_id(x), pw = parent_id(w), pb = parent_id(bias);
  Tape* tape = common_tape({&x, &w, &bias});
  std::shared_ptr<std::vector<double>> sx, sw;
  if (tape) {
    sx = std::make_shared<std::vector<double>>(xv);
    sw = std::make_shared<std::vector<double>>(wv);
  }
  return record_op(
      tape, Shape::grid4(b, co, nx, ny), std::move(out),
      [px, pw, pb, sx, sw, b, ci, co, np](Tape& t, int self) {
        const auto& g = *t.grad_if_touched(self);
        if (px >= 0) {
          auto& gx = t.grad_buffer(px);
          for (int bi = 0; bi < b; ++bi)
            for (int i = 0; i < ci; ++i) {
              double* dst = gx.data() + (static_cast<size_t>(bi) * ci + i) * np;
              for (int o = 0; o < co; ++o) {
                const double wi = (*sw)[static_cast<size_t>(o) * ci + i];
                const double* go = g.data() + (static_cast<size_t>(bi) * co + o) * np;
                for (int64_t p = 0; p < np; ++p) dst[p] += wi * go[p];
              }
            }
        }
        if (pw >= 0) {
          auto& gw = t.grad_buffer(pw);
          for (int bi = 0; bi < b; ++bi)
            for (int o = 0; o < co; ++o) {
              const double* go = g.data() + (static_cast<size_t>(bi) * co + o) * np;
              for (int i = 0; i < ci; ++i) {
                const double* src = (*sx).data() + (static_cast<size_t>(bi) * ci + i) * np;
                double acc = 0.0;
                for (int64_t p = 0; p < np; ++p) acc += go[p] * src[p];
                gw[static_cast<size_t>(o) * ci + i] += acc;
              }
            }
        }
        if (pb >= 0) {
          auto& gb = t.grad_buffer(pb);
          for (int bi = 0; bi < b; ++bi)
            for (int o = 0; o < co; ++o) {
              const double* go = g.data() + (static_cast<size_t>(bi) * co + o) * np;
              double acc = 0.0;
              for (int64_t p = 0; p < np; ++p) acc += go[p];
              gb[o] += acc;
            }
        }
      });
}

Tensor channel_affine(const Tensor& x, const std::vector<double>& cscale,
                      const std::vector<double>& cshift) {
  require(x.shape().rank == 4, "channel_affine: input must be [b,c,x,y]");
  const int b = x.shape().d[0], c = x.shape().d[1];
  const int64_t np = static_cast<int64_t>(x.shape().d[2]) * x.shape().d[3];
  require(static_cast<int>(cscale.size()) == c && static_cast<int>(cshift.size()) == c,
          "channel_affine: coefficient count must match channels");
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (int bi = 0; bi < b; ++bi)
    for (int ch = 0; ch < c; ++ch) {
      const size_t base = (static_cast<size_t>(bi) * c + ch) * np;
      for (int64_t p = 0; p < np; ++p)
        out[base + p] = cscale[ch] * xv[base + p] + cshift[ch];
    }
  int pa = parent_id(x);
  auto ss = std::make_shared<std::vector<double>>(cscale);
  return record_op(common_tape({&x}), x.shape(), std::move(out),
                   [pa, ss, b, c, np](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& gx = t.grad_buffer(pa);
                     for (int bi = 0; bi < b; ++bi)
                       for (int ch = 0; ch < c; ++ch) {
                         const size_t base = (static_cast<size_t>(bi) * c + ch) * np;
                         for (int64_t p = 0; p < np; ++p)
                           gx[base + p] += (*ss)[ch] * g[base + p];
                       }
                   });
}

// ---- spectral convolution ----
//
// Forward: X^ = rfft2(x); Y^[b,o,k] = sum_i W[i,o,k] X^[b,i,k] on the
// m-by-m low-frequency corner of the half spectrum, zero elsewhere;
// y = irfft2(Y^).
//
// Backward, with the real pairing and N = nx*ny: the adjoint of irfft2 is
// (w_ky/N) * rfft2 where w_ky doubles every column the Hermitian extension
// counts twice (all but ky = 0 here, since m <= ny/2 keeps the Nyquist
// column out of the corner). The adjoint of rfft2 on the corner modes is an
// unnormalized inverse transform of the zero-embedded spectrum, where the
// column weight cancels:
//   grad_W[i,o,k] = sum_b conj(X^[b,i,k]) * (w_ky/N) * rfft2(grad_y)[b,o,k]
//   grad_x[b,i]   = c2r_unnormalized( sum_o conj(W[i,o,k]) * rfft2(grad_y)[b,o,k] / N )
Tensor spectral_conv(const Tensor& x, const Tensor& w, int m) {
  require(x.shape().rank == 4, "spectral_conv: input must be [b,c,x,y]");
  require(w.shape().rank == 4, "spectral_conv: weights must be [c_in,c_out,m,2m]");
  const int b = x.shape().d[0], ci = x.shape().d[1];
  const int nx = x.shape().d[2], ny = x.shape().d[3];
  const int co = w.shape().d[1];
  require(m >= 1 && w.shape().d[0] == ci && w.shape().d[2] == m &&
              w.shape().d[3] == 2 * m,
          "spectral_conv: weight shape disagrees with m and channels");
  require(m <= nx / 2 && m <= ny / 2,
          "spectral_conv: m exceeds the retainable half-spectrum modes");

  const int64_t np = static_cast<int64_t>(nx) * ny;
  const auto& xv = x.values();
  const auto& wv = w.values();
  auto wc = [&wv, ci, co, m](int i, int o, int kx, int ky) {
    size_t at = ((static_cast<size_t>(i) * co + o) * m + kx) * (2 * m) + 2 * ky;
    return std::complex<double>(wv[at], wv[at + 1]);
  };

  auto xhat = std::make_shared<std::vector<fftk::ComplexGrid>>();
  xhat->reserve(static_cast<size_t>(b) * ci);
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < ci; ++i)
      xhat->push_back(fftk::rfft2(xv.data() + (static_cast<size_t>(bi) * ci + i) * np, nx, ny));

  std::vector<double> out(static_cast<size_t>(b) * co * np);
  for (int bi = 0; bi < b; ++bi)
    for (int o = 0; o < co; ++o) {
      fftk::ComplexGrid yhat(nx, ny);
      for (int kx = 0; kx < m; ++kx)
        for (int ky = 0; ky < m; ++ky) {
          std::complex<double> acc = 0.0;
          for (int i = 0; i < ci; ++i)
            acc += wc(i, o, kx, ky) * (*xhat)[static_cast<size_t>(bi) * ci + i].at(kx, ky);
          yhat.at(kx, ky) = acc;
        }
      fftk::irfft2(yhat, out.data() + (static_cast<size_t>(bi) * co + o) * np);
    }

  int px = parent_id(x), pw = parent_id(w);
  Tape* tape = common_tape({&x, &w});
  std::shared_ptr<std::vector<double>> sw;
  if (tape) sw = std::make_shared<std::vector<double>>(wv);
  if (!tape) xhat.reset();

  return record_op(
      tape, Shape::grid4(b, co, nx, ny), std::move(out),
      [px, pw, sw, xhat, b, ci, co, nx, ny, m, np](Tape& t, int self) {
        const auto& g = *t.grad_if_touched(self);
        const double inv_n = 1.0 / static_cast<double>(np);
        auto swc = [&sw, ci, co, m](int i, int o, int kx, int ky) {
          size_t at = ((static_cast<size_t>(i) * co + o) * m + kx) * (2 * m) + 2 * ky;
          return std::complex<double>((*sw)[at], (*sw)[at + 1]);
        };

        std::vector<fftk::ComplexGrid> ghat;
        ghat.reserve(static_cast<size_t>(b) * co);
        for (int bi = 0; bi < b; ++bi)
          for (int o = 0; o < co; ++o)
            ghat.push_back(fftk::rfft2(g.data() + (static_cast<size_t>(bi) * co + o) * np, nx, ny));

        if (pw >= 0) {
          auto& gw = t.grad_buffer(pw);
          for (int i = 0; i < ci; ++i)
            for (int o = 0; o < co; ++o)
              for (int kx = 0; kx < m; ++kx)
                for (int ky = 0; ky < m; ++ky) {
                  const double colw = (ky == 0 ? 1.0 : 2.0) * inv_n;
                  std::complex<double> acc = 0.0;
                  for (int bi = 0; bi < b; ++bi)
                    acc += std::conj((*xhat)[static_cast<size_t>(bi) * ci + i].at(kx, ky)) *
                           ghat[static_cast<size_t>(bi) * co + o].at(kx, ky);
                  acc *= colw;
                  size_t at = ((static_cast<size_t>(i) * co + o) * m + kx) * (2 * m) + 2 * ky;
                  gw[at] += acc.real();
                  gw[at + 1] += acc.imag();
                }
        }

        if (px >= 0) {
          auto& gx = t.grad_buffer(px);
          std::vector<double> slice(np);
          for (int bi = 0; bi < b; ++bi)
            for (int i = 0; i < ci; ++i) {
              fftk::ComplexGrid acc(nx, ny);
              for (int kx = 0; kx < m; ++kx)
                for (int ky = 0; ky < m; ++ky) {
                  std::complex<double> s = 0.0;
                  for (int o = 0; o < co; ++o)
                    s += std::conj(swc(i, o, kx, ky)) *
                         ghat[static_cast<size_t>(bi) * co + o].at(kx, ky);
                  acc.at(kx, ky) = s * inv_n;
                }
              fftk::c2r_unnormalized(acc, slice.data());
              double* dst = gx.data() + (static_cast<size_t>(bi) * ci + i) * np;
              for (int64_t p = 0; p < np; ++p) dst[p] += slice[p];
            }
        }
      });
}

// ---- padding and finite differences ----

Tensor reflection_pad(const Tensor& x, int p) {
  require(x.shape().rank == 4, "reflection_pad: input must be [b,c,x,y]");
  const int b = x.shape().d[0], c = x.shape().d[1];
  const int nx = x.shape().d[2], ny = x.shape().d[3];
  require(p >= 0 && p < nx && p < ny, "reflection_pad: padding too large");
  if (p == 0) return x;

  const int mx = nx + 2 * p, my = ny + 2 * p;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(b) * c * mx * my);
  for (int bi = 0; bi < b; ++bi)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = xv.data() + (static_cast<size_t>(bi) * c + ch) * nx * ny;
      double* dst = out.data() + (static_cast<size_t>(bi) * c + ch) * mx * my;
      for (int i = 0; i < mx; ++i) {
        const int si = reflect_index(i - p, nx);
        for (int j = 0; j < my; ++j)
          dst[static_cast<size_t>(i) * my + j] =
              src[static_cast<size_t>(si) * ny + reflect_index(j - p, ny)];
      }
    }
  int pa = parent_id(x);
  return record_op(common_tape({&x}), Shape::grid4(b, c, mx, my), std::move(out),
                   [pa, b, c, nx, ny, p, mx, my](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& gx = t.grad_buffer(pa);
                     for (int bi = 0; bi < b; ++bi)
                       for (int ch = 0; ch < c; ++ch) {
                         const double* go = g.data() + (static_cast<size_t>(bi) * c + ch) * mx * my;
                         double* dst = gx.data() + (static_cast<size_t>(bi) * c + ch) * nx * ny;
                         for (int i = 0; i < mx; ++i) {
                           const int si = reflect_index(i - p, nx);
                           for (int j = 0; j < my; ++j)
                             dst[static_cast<size_t>(si) * ny + reflect_index(j - p, ny)] +=
                                 go[static_cast<size_t>(i) * my + j];
                         }
                       }
                   });
}

Tensor crop(const Tensor& x, int p) {
  require(x.shape().rank == 4, "crop: input must be [b,c,x,y]");
  const int b = x.shape().d[0], c = x.shape().d[1];
  const int mx = x.shape().d[2], my = x.shape().d[3];
  require(p >= 0 && 2 * p < mx && 2 * p < my, "crop: padding too large");
  const int nx = mx - 2 * p, ny = my - 2 * p;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(b) * c * nx * ny);
  for (int bi = 0; bi < b; ++bi)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = xv.data() + (static_cast<size_t>(bi) * c + ch) * mx * my;
      double* dst = out.data() + (static_cast<size_t>(bi) * c + ch) * nx * ny;
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
          dst[static_cast<size_t>(i) * ny + j] =
              src[static_cast<size_t>(i + p) * my + (j + p)];
    }
  int pa = parent_id(x);
  return record_op(common_tape({&x}), Shape::grid4(b, c, nx, ny), std::move(out),
                   [pa, b, c, nx, ny, p, my](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& gx = t.grad_buffer(pa);
                     for (int bi = 0; bi < b; ++bi)
                       for (int ch = 0; ch < c; ++ch) {
                         const double* go = g.data() + (static_cast<size_t>(bi) * c + ch) * nx * ny;
                         double* dst = gx.data() +
                                       (static_cast<size_t>(bi) * c + ch) * (nx + 2 * p) * my;
                         for (int i = 0; i < nx; ++i)
                           for (int j = 0; j < ny; ++j)
                             dst[static_cast<size_t>(i + p) * my + (j + p)] +=
                                 go[static_cast<size_t>(i) * ny + j];
                       }
                   });
}

namespace {

// axis 0 differentiates along x (rows), axis 1 along y (columns).
Tensor central_diff(const Tensor& x, double delta, int axis) {
  require(x.shape().rank == 4, "central_diff: input must be [b,c,x,y]");
  require(delta > 0.0, "central_diff: spacing must be positive");
  const int b = x.shape().d[0], c = x.shape().d[1];
  const int nx = x.shape().d[2], ny = x.shape().d[3];
  require(nx >= 3 && ny >= 3, "central_diff: grid too small");
  const double f = 1.0 / (2.0 * delta);
  const auto& xv = x.values();
  std::vector<double> out(xv.size(), 0.0);
  const int di = (axis == 0) ? ny : 1;
  for (int bi = 0; bi < b; ++bi)
    for (int ch = 0; ch < c; ++ch) {
      const size_t base = (static_cast<size_t>(bi) * c + ch) * nx * ny;
      const int i_lo = (axis == 0) ? 1 : 0, i_hi = (axis == 0) ? nx - 1 : nx;
      const int j_lo = (axis == 1) ? 1 : 0, j_hi = (axis == 1) ? ny - 1 : ny;
      for (int i = i_lo; i < i_hi; ++i)
        for (int j = j_lo; j < j_hi; ++j) {
          size_t k = base + static_cast<size_t>(i) * ny + j;
          out[k] = (xv[k + di] - xv[k - di]) * f;
        }
    }
  int pa = parent_id(x);
  return record_op(common_tape({&x}), x.shape(), std::move(out),
                   [pa, b, c, nx, ny, f, di, axis](Tape& t, int self) {
                     const auto& g = *t.grad_if_touched(self);
                     auto& gx = t.grad_buffer(pa);
                     const int i_lo = (axis == 0) ? 1 : 0, i_hi = (axis == 0) ? nx - 1 : nx;
                     const int j_lo = (axis == 1) ? 1 : 0, j_hi = (axis == 1) ? ny - 1 : ny;
                     for (int bi = 0; bi < b; ++bi)
                       for (int ch = 0; ch < c; ++ch) {
                         const size_t base = (static_cast<size_t>(bi) * c + ch) * nx * ny;
                         for (int i = i_lo; i < i_hi; ++i)
                           for (int j = j_lo; j < j_hi; ++j) {
                             size_t k = base + static_cast<size_t>(i) * ny + j;
                             gx[k + di] += g[k] * f;
                             gx[k - di] -= g[k] * f;
                           }
                       }
                   });
}

}  // namespace

Tensor central_diff_x(const Tensor& x, double delta) { return central_diff(x, delta, 0); }
Tensor central_diff_y(const Tensor& x, double delta) { return central_diff(x, delta, 1); }

}  // namespace phifno::ad
