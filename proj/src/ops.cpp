#include "mml/ops.hpp"

#include <algorithm>
#include <cmath>

namespace mml {
namespace {

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_binary_shapes(const char* op, const Var& a, const Var& b) {
  if (!a->value.same_shape(b->value) && b->value.size() != 1)
    throw Error(std::string(op) + ": shape mismatch " + shape_str(a->value.shape) +
                " vs " + shape_str(b->value.shape));
}

enum class BinKind { Add, Sub, Mul };

Var binary(const char* name, BinKind kind, const Var& a, const Var& b) {
  check_binary_shapes(name, a, b);
  const bool bscalar = b->value.size() == 1 && a->value.size() != 1;
  Tensor out(a->value.shape);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    double bv = bscalar ? b->value[0] : b->value[i];
    switch (kind) {
      case BinKind::Add: out[i] = a->value[i] + bv; break;
      case BinKind::Sub: out[i] = a->value[i] - bv; break;
      case BinKind::Mul: out[i] = a->value[i] * bv; break;
    }
  }
  return make_node(std::move(out), {a, b}, [kind, bscalar](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    const std::size_t n = node.value.size();
    if (pa.requires_grad) {
      Tensor& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double g = node.grad[i];
        if (kind == BinKind::Mul) g *= bscalar ? pb.value[0] : pb.value[i];
        ga[i] += g;
      }
    }
    if (pb.requires_grad) {
      Tensor& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double g = node.grad[i];
        if (kind == BinKind::Sub) g = -g;
        if (kind == BinKind::Mul) g = node.grad[i] * pa.value[i];
        gb[bscalar ? 0 : i] += g;
      }
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary("add", BinKind::Add, a, b); }
Var sub(const Var& a, const Var& b) { return binary("sub", BinKind::Sub, a, b); }
Var mul(const Var& a, const Var& b) { return binary("mul", BinKind::Mul, a, b); }

Var scale(const Var& a, double c) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * c;
  return make_node(std::move(out), {a}, [c](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    for (std::size_t i = 0; i < node.value.size(); ++i) g[i] += c * node.grad[i];
  });
}

Var relu(const Var& a) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a->value[i]);
  return make_node(std::move(out), {a}, [](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    for (std::size_t i = 0; i < node.value.size(); ++i)
      if (p.value[i] > 0.0) g[i] += node.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(a->value[i]);
  return make_node(std::move(out), {a}, [](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    for (std::size_t i = 0; i < node.value.size(); ++i) {
      double s = node.value[i];
      g[i] += node.grad[i] * s * (1.0 - s);
    }
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return make_node(Tensor::scalar(s), {a}, [](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[0];
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2)
    throw Error("matmul: both operands must be rank 2, got " +
                shape_str(a->value.shape) + " and " + shape_str(b->value.shape));
  const std::size_t m = a->value.shape[0], k = a->value.shape[1];
  const std::size_t k2 = b->value.shape[0], n = b->value.shape[1];
  if (k != k2)
    throw Error("matmul: inner extents disagree, " + shape_str(a->value.shape) +
                " vs " + shape_str(b->value.shape));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = a->value[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b->value[p * n + j];
    }
  return make_node(std::move(out), {a, b}, [m, k, n](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    if (pa.requires_grad) {
      Tensor& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double g = node.grad[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * pb.value[p * n + j];
        }
    }
    if (pb.requires_grad) {
      Tensor& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double av = pa.value[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * node.grad[i * n + j];
        }
    }
  });
}

Var add_bias(const Var& a, const Var& bias) {
  if (a->value.rank() != 2 || bias->value.rank() != 1 ||
      a->value.shape[1] != bias->value.shape[0])
    throw Error("add_bias: expected [BxN] + [N], got " + shape_str(a->value.shape) +
                " and " + shape_str(bias->value.shape));
  const std::size_t rows = a->value.shape[0], cols = a->value.shape[1];
  Tensor out(a->value.shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[r * cols + c] = a->value[r * cols + c] + bias->value[c];
  return make_node(std::move(out), {a, bias}, [rows, cols](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    if (pa.requires_grad) {
      Tensor& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < rows * cols; ++i) ga[i] += node.grad[i];
    }
    if (pb.requires_grad) {
      Tensor& gb = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += node.grad[r * cols + c];
    }
  });
}

Var conv2d(const Var& input, const Var& kernel, std::size_t stride,
           std::size_t padding) {
  const Tensor& x = input->value;
  const Tensor& k = kernel->value;
  if (x.rank() != 4 || k.rank() != 4)
    throw Error("conv2d: expected rank-4 input and kernel, got " +
                shape_str(x.shape) + " and " + shape_str(k.shape));
  const std::size_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const std::size_t F = k.shape[0], KC = k.shape[1], kh = k.shape[2], kw = k.shape[3];
  if (C != KC)
    throw Error("conv2d: channel mismatch, input " + shape_str(x.shape) +
                " vs kernel " + shape_str(k.shape));
  if (stride == 0) throw Error("conv2d: stride must be positive");
  if (kh > H + 2 * padding || kw > W + 2 * padding)
    throw Error("conv2d: kernel " + shape_str(k.shape) +
                " larger than padded input " + shape_str(x.shape));
  const std::size_t OH = (H + 2 * padding - kh) / stride + 1;
  const std::size_t OW = (W + 2 * padding - kw) / stride + 1;

  Tensor out({B, F, OH, OW});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < kh; ++ky) {
              std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                  static_cast<std::ptrdiff_t>(padding);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              const double* xrow = &x.data[((b * C + c) * H + iy) * W];
              const double* krow = &k.data[((f * C + c) * kh + ky) * kw];
              for (std::size_t kx = 0; kx < kw; ++kx) {
                std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(padding);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                acc += xrow[ix] * krow[kx];
              }
            }
          out[((b * F + f) * OH + oy) * OW + ox] = acc;
        }

  return make_node(std::move(out), {input, kernel},
                   [B, C, H, W, F, kh, kw, OH, OW, stride, padding](Node& node) {
    Node& px = *node.parents[0];
    Node& pk = *node.parents[1];
    Tensor* gx = px.requires_grad ? &px.ensure_grad() : nullptr;
    Tensor* gk = pk.requires_grad ? &pk.ensure_grad() : nullptr;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t oy = 0; oy < OH; ++oy)
          for (std::size_t ox = 0; ox < OW; ++ox) {
            double g = node.grad[((b * F + f) * OH + oy) * OW + ox];
            if (g == 0.0) continue;
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t ky = 0; ky < kh; ++ky) {
                std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(padding);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                      static_cast<std::ptrdiff_t>(padding);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                  std::size_t xi = ((b * C + c) * H + iy) * W + ix;
                  std::size_t ki = ((f * C + c) * kh + ky) * kw + kx;
                  if (gx) (*gx)[xi] += g * pk.value[ki];
                  if (gk) (*gk)[ki] += g * px.value[xi];
                }
              }
          }
  });
}

Var global_avg_pool(const Var& a) {
  const Tensor& x = a->value;
  if (x.size() == 0) throw Error("global_avg_pool: empty tensor");
  if (x.rank() <= 2) {
    // No spatial axes: identity.
    Tensor out = x;
    return make_node(std::move(out), {a}, [](Node& node) {
      Node& p = *node.parents[0];
      if (!p.requires_grad) return;
      Tensor& g = p.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
  }
  if (x.rank() != 4)
    throw Error("global_avg_pool: expected rank 1, 2 or 4, got " +
                shape_str(x.shape));
  const std::size_t B = x.shape[0], C = x.shape[1], HW = x.shape[2] * x.shape[3];
  Tensor out({B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      const double* row = &x.data[(b * C + c) * HW];
      for (std::size_t i = 0; i < HW; ++i) s += row[i];
      out[b * C + c] = s / static_cast<double>(HW);
    }
  return make_node(std::move(out), {a}, [B, C, HW](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        double gv = node.grad[b * C + c] * inv;
        double* row = &g.data[(b * C + c) * HW];
        for (std::size_t i = 0; i < HW; ++i) row[i] += gv;
      }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& ta = a->value;
  const Tensor& tb = b->value;
  if (ta.rank() != tb.rank() || ta.rank() < 1 || ta.rank() > 2)
    throw Error("concat_channels: expected matching rank-1 or rank-2 operands, got " +
                shape_str(ta.shape) + " and " + shape_str(tb.shape));
  if (ta.rank() == 2 && ta.shape[0] != tb.shape[0])
    throw Error("concat_channels: batch mismatch, " + shape_str(ta.shape) + " vs " +
                shape_str(tb.shape));
  const std::size_t rows = ta.rank() == 2 ? ta.shape[0] : 1;
  const std::size_t ca = ta.rank() == 2 ? ta.shape[1] : ta.shape[0];
  const std::size_t cb = tb.rank() == 2 ? tb.shape[1] : tb.shape[0];
  Tensor out(ta.rank() == 2 ? std::vector<std::size_t>{rows, ca + cb}
                            : std::vector<std::size_t>{ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < ca; ++i) out[r * (ca + cb) + i] = ta.data[r * ca + i];
    for (std::size_t i = 0; i < cb; ++i)
      out[r * (ca + cb) + ca + i] = tb.data[r * cb + i];
  }
  return make_node(std::move(out), {a, b}, [rows, ca, cb](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < ca; ++i) g[r * ca + i] += node.grad[r * (ca + cb) + i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < cb; ++i)
          g[r * cb + i] += node.grad[r * (ca + cb) + ca + i];
    }
  });
}

Var channel_scale(const Var& a, const Var& w) {
  const Tensor& ta = a->value;
  const Tensor& tw = w->value;
  std::size_t B = 1, C = 0, HW = 1;
  if (ta.rank() == 1) {
    C = ta.shape[0];
  } else if (ta.rank() == 2) {
    B = ta.shape[0];
    C = ta.shape[1];
  } else if (ta.rank() == 4) {
    B = ta.shape[0];
    C = ta.shape[1];
    HW = ta.shape[2] * ta.shape[3];
  } else {
    throw Error("channel_scale: unsupported input rank " + shape_str(ta.shape));
  }
  bool per_sample;
  if (tw.rank() == 1 && tw.shape[0] == C) {
    per_sample = false;
  } else if (tw.rank() == 2 && tw.shape[0] == B && tw.shape[1] == C) {
    per_sample = true;
  } else {
    throw Error("channel_scale: gate shape " + shape_str(tw.shape) +
                " does not match input " + shape_str(ta.shape));
  }

  Tensor out(ta.shape);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      double f = 2.0 * sigmoid_scalar(tw.data[(per_sample ? b * C : 0) + c]);
      const double* in = &ta.data[(b * C + c) * HW];
      double* o = &out.data[(b * C + c) * HW];
      for (std::size_t i = 0; i < HW; ++i) o[i] = f * in[i];
    }
  return make_node(std::move(out), {a, w}, [B, C, HW, per_sample](Node& node) {
    Node& pa = *node.parents[0];
    Node& pw = *node.parents[1];
    Tensor* ga = pa.requires_grad ? &pa.ensure_grad() : nullptr;
    Tensor* gw = pw.requires_grad ? &pw.ensure_grad() : nullptr;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t wi = (per_sample ? b * C : 0) + c;
        double s = sigmoid_scalar(pw.value[wi]);
        double f = 2.0 * s;
        const double* in = &pa.value.data[(b * C + c) * HW];
        const double* go = &node.grad.data[(b * C + c) * HW];
        if (ga) {
          double* g = &ga->data[(b * C + c) * HW];
          for (std::size_t i = 0; i < HW; ++i) g[i] += f * go[i];
        }
        if (gw) {
          double dot = 0.0;
          for (std::size_t i = 0; i < HW; ++i) dot += go[i] * in[i];
          (*gw)[wi] += dot * 2.0 * s * (1.0 - s);
        }
      }
  });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  const Tensor& x = logits->value;
  if (x.rank() != 2)
    throw Error("softmax_cross_entropy: expected [BxK] logits, got " +
                shape_str(x.shape));
  const std::size_t B = x.shape[0], K = x.shape[1];
  if (labels.size() != B)
    throw Error("softmax_cross_entropy: batch mismatch, " + std::to_string(B) +
                " logit rows vs " + std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= K)
      throw Error("softmax_cross_entropy: label " + std::to_string(y) +
                  " out of range [0, " + std::to_string(K) + ")");

  Tensor probs({B, K});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = &x.data[b * K];
    double m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
    double logz = std::log(z);
    for (std::size_t k = 0; k < K; ++k)
      probs[b * K + k] = std::exp(row[k] - m) / z;
    loss -= row[labels[b]] - m - logz;
  }
  loss /= static_cast<double>(B);

  return make_node(Tensor::scalar(loss), {logits},
                   [B, K, probs = std::move(probs), labels](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    Tensor& g = p.ensure_grad();
    const double gv = node.grad[0] / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < K; ++k) {
        double d = probs[b * K + k];
        if (static_cast<std::size_t>(labels[b]) == k) d -= 1.0;
        g[b * K + k] += gv * d;
      }
  });
}

Tensor softmax_probs(const Tensor& logits) {
  if (logits.rank() != 2)
    throw Error("softmax_probs: expected [BxK] logits, got " + shape_str(logits.shape));
  const std::size_t B = logits.shape[0], K = logits.shape[1];
  Tensor out({B, K});
  for (std::size_t b = 0; b < B; ++b) {
    const double* row = &logits.data[b * K];
    double m = row[0];
    for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
    for (std::size_t k = 0; k < K; ++k) out[b * K + k] = std::exp(row[k] - m) / z;
  }
  return out;
}

void BatchNormState::init(std::size_t channels) {
  running_mean = Tensor({channels}, 0.0);
  running_var = Tensor({channels}, 1.0);
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               BatchNormState& state, bool training, double momentum, double eps) {
  const Tensor& tx = x->value;
  if (tx.rank() != 4)
    throw Error("batch_norm: expected rank-4 input, got " + shape_str(tx.shape));
  const std::size_t B = tx.shape[0], C = tx.shape[1], HW = tx.shape[2] * tx.shape[3];
  if (gamma->value.size() != C || beta->value.size() != C)
    throw Error("batch_norm: parameter length does not match channel count");
  const double n = static_cast<double>(B * HW);

  std::vector<double> mean(C), invstd(C);
  if (training) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* row = &tx.data[(b * C + c) * HW];
        for (std::size_t i = 0; i < HW; ++i) s += row[i];
      }
      mean[c] = s / n;
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* row = &tx.data[(b * C + c) * HW];
        for (std::size_t i = 0; i < HW; ++i) {
          double d = row[i] - mean[c];
          v += d * d;
        }
      }
      double var = v / n;
      invstd[c] = 1.0 / std::sqrt(var + eps);
      state.running_mean[c] = momentum * state.running_mean[c] + (1.0 - momentum) * mean[c];
      state.running_var[c] = momentum * state.running_var[c] + (1.0 - momentum) * var;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }

  Tensor out(tx.shape);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* in = &tx.data[(b * C + c) * HW];
      double* o = &out.data[(b * C + c) * HW];
      double g = gamma->value[c], bt = beta->value[c];
      for (std::size_t i = 0; i < HW; ++i)
        o[i] = g * (in[i] - mean[c]) * invstd[c] + bt;
    }

  return make_node(std::move(out), {x, gamma, beta},
                   [B, C, HW, n, training, mean = std::move(mean),
                    invstd = std::move(invstd)](Node& node) {
    Node& px = *node.parents[0];
    Node& pg = *node.parents[1];
    Node& pb = *node.parents[2];
    Tensor* gx = px.requires_grad ? &px.ensure_grad() : nullptr;
    Tensor* gg = pg.requires_grad ? &pg.ensure_grad() : nullptr;
    Tensor* gb = pb.requires_grad ? &pb.ensure_grad() : nullptr;
    for (std::size_t c = 0; c < C; ++c) {
      const double m = mean[c], is = invstd[c], gamma_c = pg.value[c];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* in = &px.value.data[(b * C + c) * HW];
        const double* go = &node.grad.data[(b * C + c) * HW];
        for (std::size_t i = 0; i < HW; ++i) {
          sum_dy += go[i];
          sum_dy_xhat += go[i] * (in[i] - m) * is;
        }
      }
      if (gg) (*gg)[c] += sum_dy_xhat;
      if (gb) (*gb)[c] += sum_dy;
      if (!gx) continue;
      if (training) {
        // dx = gamma*is/n * (n*dy - sum(dy) - xhat*sum(dy*xhat))
        for (std::size_t b = 0; b < B; ++b) {
          const double* in = &px.value.data[(b * C + c) * HW];
          const double* go = &node.grad.data[(b * C + c) * HW];
          double* g = &gx->data[(b * C + c) * HW];
          for (std::size_t i = 0; i < HW; ++i) {
            double xhat = (in[i] - m) * is;
            g[i] += gamma_c * is / n * (n * go[i] - sum_dy - xhat * sum_dy_xhat);
          }
        }
      } else {
        for (std::size_t b = 0; b < B; ++b) {
          const double* go = &node.grad.data[(b * C + c) * HW];
          double* g = &gx->data[(b * C + c) * HW];
          for (std::size_t i = 0; i < HW; ++i) g[i] += gamma_c * is * go[i];
        }
      }
    }
  });
}

}  // namespace mml
