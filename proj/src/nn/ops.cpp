#include "msp/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace msp::nn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ArgumentError(std::string(op) + ": shape mismatch " +
                        a.shape_str() + " vs " + b.shape_str());
  }
}

void check_ndim(const Tensor& a, int ndim, const char* op) {
  if (a.ndim() != ndim) {
    throw ArgumentError(std::string(op) + ": expected " +
                        std::to_string(ndim) + "-d tensor, got " +
                        a.shape_str());
  }
}

/// Row-wise log-softmax of logits[N,K] (max-subtracted).
Tensor log_softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  Tensor out(logits.shape());
  for (int i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) m = std::max(m, logits.at2(i, j));
    double z = 0;
    for (int j = 0; j < k; ++j) z += std::exp(logits.at2(i, j) - m);
    const double logz = std::log(z);
    for (int j = 0; j < k; ++j) {
      out.at2(i, j) = logits.at2(i, j) - m - logz;
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise and structural
// ---------------------------------------------------------------------------

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.val(a);
  check_same_shape(av, t.val(b), "add");
  Tensor out = av;
  const Tensor& bv = t.val(b);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return t.node(std::move(out), [a, b](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  Tensor out = t.val(a);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return t.node(std::move(out), [a, s](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
  });
}

Var relu(Tape& t, Var a) {
  Tensor out = t.val(a);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::max(0.0, out[i]);
  return t.node(std::move(out), [a](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& v = tp.val(self);  // relu output: >0 iff input was >0
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) {
      if (v[i] > 0) ga[i] += g[i];
    }
  });
}

Var detach(Tape& t, Var a) { return t.leaf(t.val(a)); }

Var concat_cols(Tape& t, Var a, Var b) {
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  check_ndim(av, 2, "concat_cols");
  check_ndim(bv, 2, "concat_cols");
  if (av.dim(0) != bv.dim(0)) {
    throw ArgumentError("concat_cols: row counts differ");
  }
  const int n = av.dim(0), c1 = av.dim(1), c2 = bv.dim(1);
  Tensor out(std::vector<int>{n, c1 + c2});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c1; ++j) out.at2(i, j) = av.at2(i, j);
    for (int j = 0; j < c2; ++j) out.at2(i, c1 + j) = bv.at2(i, j);
  }
  return t.node(std::move(out), [a, b, n, c1, c2](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < c1; ++j) ga.at2(i, j) += g.at2(i, j);
      for (int j = 0; j < c2; ++j) gb.at2(i, j) += g.at2(i, c1 + j);
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  check_ndim(xv, 4, "conv2d");
  check_ndim(wv, 4, "conv2d");
  if (stride < 1 || pad < 0) {
    throw ArgumentError("conv2d: stride must be >= 1 and pad >= 0");
  }
  const int n = xv.dim(0), ci = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const int co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != ci) {
    throw ArgumentError("conv2d: input channels mismatch");
  }
  if (b.valid() && (t.val(b).ndim() != 1 || t.val(b).dim(0) != co)) {
    throw ArgumentError("conv2d: bias shape mismatch");
  }
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) {
    throw ArgumentError("conv2d: kernel larger than padded input");
  }

  Tensor out(std::vector<int>{n, co, ho, wo});
  const double* xp = xv.data();
  const double* wp = wv.data();
  const double* bp = b.valid() ? t.val(b).data() : nullptr;
  double* op = out.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (int in = 0; in < n; ++in) {
    for (int oc = 0; oc < co; ++oc) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double acc = bp ? bp[oc] : 0.0;
          for (int ic = 0; ic < ci; ++ic) {
            const double* xplane =
                xp + (static_cast<size_t>(in) * ci + ic) * h * wd;
            const double* wplane =
                wp + (static_cast<size_t>(oc) * ci + ic) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wd) continue;
                acc += xplane[static_cast<size_t>(iy) * wd + ix] *
                       wplane[static_cast<size_t>(ky) * kw + kx];
              }
            }
          }
          op[((static_cast<size_t>(in) * co + oc) * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }

  return t.node(
      std::move(out),
      [x, w, b, stride, pad, n, ci, h, wd, co, kh, kw, ho, wo](Tape& tp,
                                                              Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xv2 = tp.val(x);
        const Tensor& wv2 = tp.val(w);
        const double* gp = g.data();
        const double* xp2 = xv2.data();
        const double* wp2 = wv2.data();

        // d/dx: gather formulation — each input pixel sums the output
        // positions its value reached. Writes are disjoint per (n, ic),
        // so the loop parallelizes deterministically.
        {
          Tensor& gx = tp.grad(x);
          double* gxp = gx.data();
#pragma omp parallel for collapse(2) schedule(static)
          for (int in = 0; in < n; ++in) {
            for (int ic = 0; ic < ci; ++ic) {
              for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < wd; ++ix) {
                  double acc = 0;
                  for (int ky = 0; ky < kh; ++ky) {
                    const int num_y = iy + pad - ky;
                    if (num_y < 0 || num_y % stride) continue;
                    const int oy = num_y / stride;
                    if (oy >= ho) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                      const int num_x = ix + pad - kx;
                      if (num_x < 0 || num_x % stride) continue;
                      const int ox = num_x / stride;
                      if (ox >= wo) continue;
                      for (int oc = 0; oc < co; ++oc) {
                        acc +=
                            gp[((static_cast<size_t>(in) * co + oc) * ho +
                                oy) *
                                   wo +
                               ox] *
                            wp2[((static_cast<size_t>(oc) * ci + ic) * kh +
                                 ky) *
                                    kw +
                                kx];
                      }
                    }
                  }
                  gxp[(static_cast<size_t>(in) * ci + ic) * h * wd +
                      static_cast<size_t>(iy) * wd + ix] += acc;
                }
              }
            }
          }
        }

        // d/dw: each weight sums over batch and output positions in fixed
        // order; disjoint per weight index.
        {
          Tensor& gw = tp.grad(w);
          double* gwp = gw.data();
#pragma omp parallel for collapse(2) schedule(static)
          for (int oc = 0; oc < co; ++oc) {
            for (int ic = 0; ic < ci; ++ic) {
              for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                  double acc = 0;
                  for (int in = 0; in < n; ++in) {
                    for (int oy = 0; oy < ho; ++oy) {
                      const int iy = oy * stride - pad + ky;
                      if (iy < 0 || iy >= h) continue;
                      for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= wd) continue;
                        acc += gp[((static_cast<size_t>(in) * co + oc) * ho +
                                   oy) *
                                      wo +
                                  ox] *
                               xp2[(static_cast<size_t>(in) * ci + ic) * h *
                                       wd +
                                   static_cast<size_t>(iy) * wd + ix];
                      }
                    }
                  }
                  gwp[((static_cast<size_t>(oc) * ci + ic) * kh + ky) * kw +
                      kx] += acc;
                }
              }
            }
          }
        }

        if (b.valid()) {
          Tensor& gb = tp.grad(b);
          for (int oc = 0; oc < co; ++oc) {
            double acc = 0;
            for (int in = 0; in < n; ++in) {
              for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                  acc += gp[((static_cast<size_t>(in) * co + oc) * ho + oy) *
                                wo +
                            ox];
                }
              }
            }
            gb[oc] += acc;
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

Var maxpool2d(Tape& t, Var x, int kernel, int stride, int pad) {
  const Tensor& xv = t.val(x);
  check_ndim(xv, 4, "maxpool2d");
  if (kernel < 1 || stride < 1 || pad < 0 || pad >= kernel) {
    throw ArgumentError("maxpool2d: invalid kernel/stride/pad");
  }
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int ho = (h + 2 * pad - kernel) / stride + 1;
  const int wo = (w + 2 * pad - kernel) / stride + 1;
  if (ho <= 0 || wo <= 0) {
    throw ArgumentError("maxpool2d: kernel larger than padded input");
  }

  Tensor out(std::vector<int>{n, c, ho, wo});
  // Flat input index of each output's max, for the backward scatter.
  Tensor arg(std::vector<int>{n, c, ho, wo}, -1.0);
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_i = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              const int64_t flat =
                  ((static_cast<int64_t>(in) * c + ic) * h + iy) * w + ix;
              if (xv[flat] > best) {
                best = xv[flat];
                best_i = flat;
              }
            }
          }
          out.at4(in, ic, oy, ox) = best_i >= 0 ? best : 0.0;
          arg.at4(in, ic, oy, ox) = static_cast<double>(best_i);
        }
      }
    }
  }

  Var arg_var = t.leaf(std::move(arg));
  return t.node(std::move(out), [x, arg_var](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& a = tp.val(arg_var);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < g.numel(); ++i) {
      const int64_t src = static_cast<int64_t>(a[i]);
      if (src >= 0) gx[src] += g[i];
    }
  });
}

Var global_max_pool(Tape& t, Var x) {
  const Tensor& xv = t.val(x);
  check_ndim(xv, 4, "global_max_pool");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor out(std::vector<int>{n, c});
  Tensor arg(std::vector<int>{n, c});
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      double best = -std::numeric_limits<double>::infinity();
      int64_t best_i = 0;
      const int64_t base = (static_cast<int64_t>(in) * c + ic) * h * w;
      for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        if (xv[base + i] > best) {
          best = xv[base + i];
          best_i = base + i;
        }
      }
      out.at2(in, ic) = best;
      arg.at2(in, ic) = static_cast<double>(best_i);
    }
  }
  Var arg_var = t.leaf(std::move(arg));
  return t.node(std::move(out), [x, arg_var](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& a = tp.val(arg_var);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < g.numel(); ++i) {
      gx[static_cast<int64_t>(a[i])] += g[i];
    }
  });
}

Var global_avg_pool(Tape& t, Var x) {
  const Tensor& xv = t.val(x);
  check_ndim(xv, 4, "global_avg_pool");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  Tensor out(std::vector<int>{n, c});
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      const int64_t base = (static_cast<int64_t>(in) * c + ic) * h * w;
      double acc = 0;
      for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
        acc += xv[base + i];
      }
      out.at2(in, ic) = acc * inv;
    }
  }
  return t.node(std::move(out), [x, n, c, h, w, inv](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (int in = 0; in < n; ++in) {
      for (int ic = 0; ic < c; ++ic) {
        const int64_t base = (static_cast<int64_t>(in) * c + ic) * h * w;
        const double gv = g.at2(in, ic) * inv;
        for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i) {
          gx[base + i] += gv;
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Var linear(Tape& t, Var x, Var w, Var b) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  check_ndim(xv, 2, "linear");
  check_ndim(wv, 2, "linear");
  const int n = xv.dim(0), ci = xv.dim(1), co = wv.dim(0);
  if (wv.dim(1) != ci) {
    throw ArgumentError("linear: weight expects " + std::to_string(ci) +
                        " inputs, got " + wv.shape_str());
  }
  if (b.valid() && (t.val(b).ndim() != 1 || t.val(b).dim(0) != co)) {
    throw ArgumentError("linear: bias shape mismatch");
  }
  Tensor out(std::vector<int>{n, co});
  const double* bp = b.valid() ? t.val(b).data() : nullptr;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < co; ++j) {
      double acc = bp ? bp[j] : 0.0;
      for (int k = 0; k < ci; ++k) acc += xv.at2(i, k) * wv.at2(j, k);
      out.at2(i, j) = acc;
    }
  }
  return t.node(std::move(out), [x, w, b, n, ci, co](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv2 = tp.val(x);
    const Tensor& wv2 = tp.val(w);
    Tensor& gx = tp.grad(x);
    Tensor& gw = tp.grad(w);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < co; ++j) {
        const double gv = g.at2(i, j);
        for (int k = 0; k < ci; ++k) {
          gx.at2(i, k) += gv * wv2.at2(j, k);
          gw.at2(j, k) += gv * xv2.at2(i, k);
        }
      }
    }
    if (b.valid()) {
      Tensor& gb = tp.grad(b);
      for (int j = 0; j < co; ++j) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += g.at2(i, j);
        gb[j] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

Var batchnorm(Tape& t, Var x, Var gamma, Var beta, BatchNormState& state,
              bool train, bool update_running, double momentum, double eps) {
  const Tensor& xv = t.val(x);
  if (xv.ndim() != 2 && xv.ndim() != 4) {
    throw ArgumentError("batchnorm: expected [N,C] or [N,C,H,W], got " +
                        xv.shape_str());
  }
  const int n = xv.dim(0);
  const int c = xv.dim(1);
  const int64_t spatial = xv.ndim() == 4
                              ? static_cast<int64_t>(xv.dim(2)) * xv.dim(3)
                              : 1;
  const int64_t m = n * spatial;  // normalization set size per channel
  if (t.val(gamma).numel() != c || t.val(beta).numel() != c) {
    throw ArgumentError("batchnorm: gamma/beta must have one entry per "
                        "channel");
  }
  if (state.running_mean.numel() != c || state.running_var.numel() != c) {
    throw ArgumentError("batchnorm: running stats not sized to channels");
  }

  // Per-channel mean and (biased) variance — batch stats in train mode,
  // running estimates in eval mode.
  Tensor mean(std::vector<int>{c});
  Tensor var(std::vector<int>{c});
  if (train) {
    for (int ic = 0; ic < c; ++ic) {
      double s = 0;
      for (int in = 0; in < n; ++in) {
        const int64_t base = (static_cast<int64_t>(in) * c + ic) * spatial;
        for (int64_t i = 0; i < spatial; ++i) s += xv[base + i];
      }
      mean[ic] = s / static_cast<double>(m);
    }
    for (int ic = 0; ic < c; ++ic) {
      double s = 0;
      for (int in = 0; in < n; ++in) {
        const int64_t base = (static_cast<int64_t>(in) * c + ic) * spatial;
        for (int64_t i = 0; i < spatial; ++i) {
          const double d = xv[base + i] - mean[ic];
          s += d * d;
        }
      }
      var[ic] = s / static_cast<double>(m);
    }
    if (update_running) {
      for (int ic = 0; ic < c; ++ic) {
        state.running_mean[ic] =
            (1.0 - momentum) * state.running_mean[ic] + momentum * mean[ic];
        state.running_var[ic] =
            (1.0 - momentum) * state.running_var[ic] + momentum * var[ic];
      }
      state.batches_seen += 1;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  Tensor inv_std(std::vector<int>{c});
  for (int ic = 0; ic < c; ++ic) {
    inv_std[ic] = 1.0 / std::sqrt(var[ic] + eps);
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  const Tensor& gv = t.val(gamma);
  const Tensor& bv = t.val(beta);
  for (int in = 0; in < n; ++in) {
    for (int ic = 0; ic < c; ++ic) {
      const int64_t base = (static_cast<int64_t>(in) * c + ic) * spatial;
      for (int64_t i = 0; i < spatial; ++i) {
        const double xh = (xv[base + i] - mean[ic]) * inv_std[ic];
        xhat[base + i] = xh;
        out[base + i] = gv[ic] * xh + bv[ic];
      }
    }
  }

  Var xhat_var = t.leaf(std::move(xhat));
  Var istd_var = t.leaf(std::move(inv_std));
  return t.node(
      std::move(out),
      [x, gamma, beta, xhat_var, istd_var, train, n, c, spatial, m](
          Tape& tp, Var self) {
        const Tensor& g = tp.grad(self);
        const Tensor& xh = tp.val(xhat_var);
        const Tensor& istd = tp.val(istd_var);
        const Tensor& gam = tp.val(gamma);
        Tensor& ggamma = tp.grad(gamma);
        Tensor& gbeta = tp.grad(beta);
        Tensor& gx = tp.grad(x);

        for (int ic = 0; ic < c; ++ic) {
          double sum_g = 0, sum_gxh = 0;
          for (int in = 0; in < n; ++in) {
            const int64_t base =
                (static_cast<int64_t>(in) * c + ic) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
              sum_g += g[base + i];
              sum_gxh += g[base + i] * xh[base + i];
            }
          }
          ggamma[ic] += sum_gxh;
          gbeta[ic] += sum_g;

          const double k = gam[ic] * istd[ic];
          if (train) {
            // Batch statistics are functions of x, so their gradient paths
            // fold into the two mean-correction terms.
            const double mg = sum_g / static_cast<double>(m);
            const double mgxh = sum_gxh / static_cast<double>(m);
            for (int in = 0; in < n; ++in) {
              const int64_t base =
                  (static_cast<int64_t>(in) * c + ic) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                gx[base + i] +=
                    k * (g[base + i] - mg - xh[base + i] * mgxh);
              }
            }
          } else {
            for (int in = 0; in < n; ++in) {
              const int64_t base =
                  (static_cast<int64_t>(in) * c + ic) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                gx[base + i] += k * g[base + i];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

Var spatial_softmax(Tape& t, Var s) {
  const Tensor& sv = t.val(s);
  check_ndim(sv, 4, "spatial_softmax");
  if (sv.dim(1) != 1) {
    throw ArgumentError("spatial_softmax: expected a single channel, got " +
                        sv.shape_str());
  }
  const int n = sv.dim(0);
  const int64_t hw = static_cast<int64_t>(sv.dim(2)) * sv.dim(3);
  for (int64_t i = 0; i < sv.numel(); ++i) {
    if (!std::isfinite(sv[i])) {
      throw NumericError("spatial_softmax: non-finite attention logit");
    }
  }
  Tensor out(sv.shape());
  for (int in = 0; in < n; ++in) {
    const int64_t base = static_cast<int64_t>(in) * hw;
    double m = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < hw; ++i) m = std::max(m, sv[base + i]);
    double z = 0;
    for (int64_t i = 0; i < hw; ++i) {
      out[base + i] = std::exp(sv[base + i] - m);
      z += out[base + i];
    }
    for (int64_t i = 0; i < hw; ++i) out[base + i] /= z;
  }
  return t.node(std::move(out), [s, n, hw](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& a = tp.val(self);
    Tensor& gs = tp.grad(s);
    for (int in = 0; in < n; ++in) {
      const int64_t base = static_cast<int64_t>(in) * hw;
      double dot = 0;
      for (int64_t i = 0; i < hw; ++i) dot += g[base + i] * a[base + i];
      for (int64_t i = 0; i < hw; ++i) {
        gs[base + i] += a[base + i] * (g[base + i] - dot);
      }
    }
  });
}

Var gate(Tape& t, Var f, Var a) {
  const Tensor& fv = t.val(f);
  const Tensor& av = t.val(a);
  check_ndim(fv, 4, "gate");
  check_ndim(av, 4, "gate");
  if (av.dim(0) != fv.dim(0) || av.dim(1) != 1 || av.dim(2) != fv.dim(2) ||
      av.dim(3) != fv.dim(3)) {
    throw ArgumentError("gate: attention map must be [N,1,H,W] matching the "
                        "features, got " + av.shape_str() + " vs " +
                        fv.shape_str());
  }
  const int n = fv.dim(0), c = fv.dim(1);
  const int64_t hw = static_cast<int64_t>(fv.dim(2)) * fv.dim(3);
  Tensor out(fv.shape());
  for (int in = 0; in < n; ++in) {
    const int64_t abase = static_cast<int64_t>(in) * hw;
    for (int ic = 0; ic < c; ++ic) {
      const int64_t fbase = (static_cast<int64_t>(in) * c + ic) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        out[fbase + i] = fv[fbase + i] * av[abase + i];
      }
    }
  }
  return t.node(std::move(out), [f, a, n, c, hw](Tape& tp, Var self) {
    const Tensor& g = tp.grad(self);
    const Tensor& fv2 = tp.val(f);
    const Tensor& av2 = tp.val(a);
    Tensor& gf = tp.grad(f);
    Tensor& ga = tp.grad(a);
    for (int in = 0; in < n; ++in) {
      const int64_t abase = static_cast<int64_t>(in) * hw;
      for (int ic = 0; ic < c; ++ic) {
        const int64_t fbase = (static_cast<int64_t>(in) * c + ic) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          gf[fbase + i] += g[fbase + i] * av2[abase + i];
          ga[abase + i] += g[fbase + i] * fv2[fbase + i];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and loss kernels
// ---------------------------------------------------------------------------

Var inner_const(Tape& t, Var x, Tensor w) {
  check_same_shape(t.val(x), w, "inner_const");
  double acc = 0;
  const Tensor& xv = t.val(x);
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i] * w[i];
  Var w_var = t.leaf(std::move(w));
  return t.node(Tensor::scalar(acc), [x, w_var](Tape& tp, Var self) {
    const double g = tp.grad(self)[0];
    const Tensor& wv = tp.val(w_var);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g * wv[i];
  });
}

Var log_inner_const(Tape& t, Var x, Tensor w) {
  check_same_shape(t.val(x), w, "log_inner_const");
  const Tensor& xv = t.val(x);
  double acc = 0;
  for (int64_t i = 0; i < xv.numel(); ++i) {
    if (w[i] == 0.0) continue;
    if (!(xv[i] > 0.0)) {
      throw NumericError("log_inner_const: nonpositive input under nonzero "
                         "weight");
    }
    acc += w[i] * std::log(xv[i]);
  }
  Var w_var = t.leaf(std::move(w));
  return t.node(Tensor::scalar(acc), [x, w_var](Tape& tp, Var self) {
    const double g = tp.grad(self)[0];
    const Tensor& wv = tp.val(w_var);
    const Tensor& xv2 = tp.val(x);
    Tensor& gx = tp.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) {
      if (wv[i] != 0.0) gx[i] += g * wv[i] / xv2[i];
    }
  });
}

Var softmax_ce_mean(Tape& t, Var logits, const std::vector<int>& labels) {
  const Tensor& lv = t.val(logits);
  check_ndim(lv, 2, "softmax_ce_mean");
  const int n = lv.dim(0), k = lv.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ArgumentError("softmax_ce_mean: one label per row required");
  }
  for (int label : labels) {
    if (label < 0 || label >= k) {
      throw ArgumentError("softmax_ce_mean: label " + std::to_string(label) +
                          " out of range [0," + std::to_string(k) + ")");
    }
  }
  Tensor logp = log_softmax_rows(lv);
  double acc = 0;
  for (int i = 0; i < n; ++i) acc -= logp.at2(i, labels[i]);
  acc /= n;

  Var logp_var = t.leaf(std::move(logp));
  std::vector<int> labels_copy = labels;
  return t.node(
      Tensor::scalar(acc),
      [logits, logp_var, labels_copy, n, k](Tape& tp, Var self) {
        const double g = tp.grad(self)[0] / n;
        const Tensor& lp = tp.val(logp_var);
        Tensor& gl = tp.grad(logits);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < k; ++j) {
            const double p = std::exp(lp.at2(i, j));
            gl.at2(i, j) += g * (p - (j == labels_copy[i] ? 1.0 : 0.0));
          }
        }
      });
}

Var softmax_ce_target_mean(Tape& t, Var logits, Tensor target) {
  const Tensor& lv = t.val(logits);
  check_ndim(lv, 2, "softmax_ce_target_mean");
  check_same_shape(lv, target, "softmax_ce_target_mean");
  const int n = lv.dim(0), k = lv.dim(1);
  Tensor logp = log_softmax_rows(lv);
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (target.at2(i, j) != 0.0) {
        acc -= target.at2(i, j) * logp.at2(i, j);
      }
    }
  }
  acc /= n;

  Var logp_var = t.leaf(std::move(logp));
  Var target_var = t.leaf(std::move(target));
  return t.node(
      Tensor::scalar(acc),
      [logits, logp_var, target_var, n, k](Tape& tp, Var self) {
        const double g = tp.grad(self)[0] / n;
        const Tensor& lp = tp.val(logp_var);
        const Tensor& tv = tp.val(target_var);
        Tensor& gl = tp.grad(logits);
        for (int i = 0; i < n; ++i) {
          double row_mass = 0;
          for (int j = 0; j < k; ++j) row_mass += tv.at2(i, j);
          if (row_mass == 0.0) continue;
          for (int j = 0; j < k; ++j) {
            const double p = std::exp(lp.at2(i, j));
            gl.at2(i, j) += g * (p * row_mass - tv.at2(i, j));
          }
        }
      });
}

Var batch_hard_triplet(Tape& t, Var emb, const std::vector<int>& labels,
                       double margin) {
  const Tensor& ev = t.val(emb);
  check_ndim(ev, 2, "batch_hard_triplet");
  const int n = ev.dim(0), d = ev.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ArgumentError("batch_hard_triplet: one label per embedding "
                        "required");
  }

  auto dist = [&](int i, int j) {
    double s = 0;
    for (int q = 0; q < d; ++q) {
      const double diff = ev.at2(i, q) - ev.at2(j, q);
      s += diff * diff;
    }
    return std::sqrt(std::max(s, 0.0));
  };

  std::vector<int> pos(static_cast<size_t>(n), -1);
  std::vector<int> neg(static_cast<size_t>(n), -1);
  std::vector<double> hinge(static_cast<size_t>(n), 0.0);
  int active_anchors = 0;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    double dp = -1, dn = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dij = dist(i, j);
      if (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(i)]) {
        if (dij > dp) {
          dp = dij;
          pos[static_cast<size_t>(i)] = j;
        }
      } else if (dij < dn) {
        dn = dij;
        neg[static_cast<size_t>(i)] = j;
      }
    }
    if (pos[static_cast<size_t>(i)] >= 0 && neg[static_cast<size_t>(i)] >= 0) {
      ++active_anchors;
      hinge[static_cast<size_t>(i)] = std::max(0.0, margin + dp - dn);
      total += hinge[static_cast<size_t>(i)];
    }
  }

  if (active_anchors == 0) {
    std::cerr << "warning: triplet loss batch has no anchor with both a "
                 "positive and a negative; contributing 0\n";
    return t.leaf(Tensor::scalar(0.0));
  }
  total /= active_anchors;

  const int anchors = active_anchors;
  return t.node(
      Tensor::scalar(total),
      [emb, pos, neg, hinge, anchors, n, d](Tape& tp, Var self) {
        const double g = tp.grad(self)[0] / anchors;
        const Tensor& e = tp.val(emb);
        Tensor& ge = tp.grad(emb);
        auto push_pair = [&](int i, int j, double sign) {
          double s = 0;
          for (int q = 0; q < d; ++q) {
            const double diff = e.at2(i, q) - e.at2(j, q);
            s += diff * diff;
          }
          const double dij = std::max(std::sqrt(std::max(s, 0.0)), 1e-12);
          for (int q = 0; q < d; ++q) {
            const double diff = (e.at2(i, q) - e.at2(j, q)) / dij;
            ge.at2(i, q) += sign * g * diff;
            ge.at2(j, q) -= sign * g * diff;
          }
        };
        for (int i = 0; i < n; ++i) {
          if (hinge[static_cast<size_t>(i)] <= 0.0) continue;
          push_pair(i, pos[static_cast<size_t>(i)], 1.0);   // d(dist_pos)
          push_pair(i, neg[static_cast<size_t>(i)], -1.0);  // -d(dist_neg)
        }
      });
}

}  // namespace msp::nn
