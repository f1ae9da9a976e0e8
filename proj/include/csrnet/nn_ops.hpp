#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "csrnet/alphabet.hpp"
#include "csrnet/errors.hpp"
#include "csrnet/rng.hpp"
#include "csrnet/tensor.hpp"

namespace csrnet::ops {

// ---------------------------------------------------------------------------
// Embedding lookup
// ---------------------------------------------------------------------------

// W is d x |C|; output column j is W[:, s.indices[j]].
inline Tensor embedding_forward(const Tensor& W, const EncodedSentence& s) {
  const int d = W.shape[0];
  const int n_symbols = W.shape[1];
  const int L = static_cast<int>(s.indices.size());
  Tensor S = Tensor::zeros({d, L});
  for (int j = 0; j < L; ++j) {
    const int idx = s.indices[static_cast<std::size_t>(j)];
    if (idx < 0 || idx >= n_symbols) {
      throw contract_error("embedding index out of range");
    }
  }
  for (int r = 0; r < d; ++r) {
    const double* wrow = W.row(r);
    double* srow = S.row(r);
    for (int j = 0; j < L; ++j) {
      srow[j] = wrow[s.indices[static_cast<std::size_t>(j)]];
    }
  }
  return S;
}

// Accumulates into dW (repeated indices sum).
inline void embedding_backward(const EncodedSentence& s, const Tensor& dS,
                               Tensor& dW) {
  const int d = dW.shape[0];
  const int L = dS.shape[1];
  for (int r = 0; r < d; ++r) {
    double* dwrow = dW.row(r);
    const double* dsrow = dS.row(r);
    for (int j = 0; j < L; ++j) {
      dwrow[s.indices[static_cast<std::size_t>(j)]] += dsrow[j];
    }
  }
}

// ---------------------------------------------------------------------------
// 1-D convolution over the time axis
// ---------------------------------------------------------------------------

enum class ConvMode { narrow, wide };

// Filter bank for one conv block plus its batch-norm parameters. All
// vectors have length n (the filter count); running stats are the
// inference-time normalization statistics.
struct ConvBlockParams {
  Tensor F;  // n x c x w
  std::vector<double> b;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  int n_filters() const { return F.shape[0]; }
  int in_channels() const { return F.shape[1]; }
  int width() const { return F.shape[2]; }
};

inline int conv_out_len(int L, int w, ConvMode mode) {
  return mode == ConvMode::narrow ? L - w + 1 : L + w - 1;
}

// out(i,j) = b_i + sum_{ch,k} F(i,ch,k) * S(ch, j+k+off), with off = 0 for
// narrow and -(w-1) for wide; wide treats out-of-range positions as zero.
inline Tensor conv1d_forward(const ConvBlockParams& block, const Tensor& S,
                             ConvMode mode) {
  const int n = block.n_filters();
  const int c = block.in_channels();
  const int w = block.width();
  if (S.rank() != 2 || S.shape[0] != c) {
    throw shape_error("conv1d: input channel mismatch");
  }
  const int L = S.shape[1];
  if (mode == ConvMode::narrow && L < w) {
    throw shape_error("conv1d: narrow mode needs L >= filter width");
  }
  const int Lout = conv_out_len(L, w, mode);
  const int off = mode == ConvMode::narrow ? 0 : -(w - 1);

  Tensor T = Tensor::zeros({n, Lout});
  for (int i = 0; i < n; ++i) {
    double* trow = T.row(i);
    std::fill(trow, trow + Lout, block.b[static_cast<std::size_t>(i)]);
    for (int ch = 0; ch < c; ++ch) {
      const double* srow = S.row(ch);
      const double* frow = block.F.row(i, ch);
      for (int k = 0; k < w; ++k) {
        const double fv = frow[k];
        const int jlo = std::max(0, -(k + off));
        const int jhi = std::min(Lout, L - k - off);
        const double* src = srow + k + off;
        for (int j = jlo; j < jhi; ++j) {
          trow[j] += fv * src[j];
        }
      }
    }
  }
  return T;
}

struct ConvGrads {
  Tensor dF;
  std::vector<double> db;
  Tensor dS;
};

inline ConvGrads conv1d_backward(const ConvBlockParams& block, const Tensor& S,
                                 ConvMode mode, const Tensor& dT) {
  const int n = block.n_filters();
  const int c = block.in_channels();
  const int w = block.width();
  const int L = S.shape[1];
  const int Lout = conv_out_len(L, w, mode);
  if (dT.shape[0] != n || dT.shape[1] != Lout) {
    throw shape_error("conv1d backward: upstream gradient shape mismatch");
  }
  const int off = mode == ConvMode::narrow ? 0 : -(w - 1);

  ConvGrads g;
  g.dF = Tensor::zeros({n, c, w});
  g.db.assign(static_cast<std::size_t>(n), 0.0);
  g.dS = Tensor::zeros({c, L});

  for (int i = 0; i < n; ++i) {
    const double* dtrow = dT.row(i);
    double acc = 0.0;
    for (int j = 0; j < Lout; ++j) acc += dtrow[j];
    g.db[static_cast<std::size_t>(i)] = acc;

    for (int ch = 0; ch < c; ++ch) {
      const double* srow = S.row(ch);
      double* dsrow = g.dS.row(ch);
      const double* frow = block.F.row(i, ch);
      double* dfrow = g.dF.row(i, ch);
      for (int k = 0; k < w; ++k) {
        const int jlo = std::max(0, -(k + off));
        const int jhi = std::min(Lout, L - k - off);
        const double* src = srow + k + off;
        double* dst = dsrow + k + off;
        const double fv = frow[k];
        double df = 0.0;
        for (int j = jlo; j < jhi; ++j) {
          df += dtrow[j] * src[j];
          dst[j] += fv * dtrow[j];
        }
        dfrow[k] += df;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

// Population layout: X is (B, n, L); statistics pool over batch items and
// time positions, per filter. A per-pair pass is just B = 1.
struct BnCache {
  std::vector<double> mean;
  std::vector<double> var;  // population (biased) variance
  std::vector<double> inv_std;
  Tensor x_hat;
  int population = 0;
};

inline BnCache bn_forward_train(const Tensor& X, const std::vector<double>& gamma,
                                const std::vector<double>& beta, double eps,
                                Tensor& Y) {
  if (X.rank() != 3) throw shape_error("batchnorm: expected rank-3 input");
  const int B = X.shape[0];
  const int n = X.shape[1];
  const int L = X.shape[2];
  const int P = B * L;
  if (P < 2) {
    throw contract_error("batchnorm train mode needs population >= 2");
  }

  BnCache cache;
  cache.mean.assign(static_cast<std::size_t>(n), 0.0);
  cache.var.assign(static_cast<std::size_t>(n), 0.0);
  cache.inv_std.assign(static_cast<std::size_t>(n), 0.0);
  cache.x_hat = Tensor::zeros({B, n, L});
  cache.population = P;
  Y = Tensor::zeros({B, n, L});

  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int bi = 0; bi < B; ++bi) {
      const double* xrow = X.row(bi, i);
      for (int l = 0; l < L; ++l) sum += xrow[l];
    }
    const double mean = sum / P;
    double sq = 0.0;
    for (int bi = 0; bi < B; ++bi) {
      const double* xrow = X.row(bi, i);
      for (int l = 0; l < L; ++l) {
        const double d = xrow[l] - mean;
        sq += d * d;
      }
    }
    const double var = sq / P;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.mean[static_cast<std::size_t>(i)] = mean;
    cache.var[static_cast<std::size_t>(i)] = var;
    cache.inv_std[static_cast<std::size_t>(i)] = inv;

    const double g = gamma[static_cast<std::size_t>(i)];
    const double be = beta[static_cast<std::size_t>(i)];
    for (int bi = 0; bi < B; ++bi) {
      const double* xrow = X.row(bi, i);
      double* hrow = cache.x_hat.row(bi, i);
      double* yrow = Y.row(bi, i);
      for (int l = 0; l < L; ++l) {
        const double h = (xrow[l] - mean) * inv;
        hrow[l] = h;
        yrow[l] = g * h + be;
      }
    }
  }
  return cache;
}

inline Tensor bn_forward_infer(const Tensor& X, const std::vector<double>& gamma,
                               const std::vector<double>& beta,
                               const std::vector<double>& running_mean,
                               const std::vector<double>& running_var,
                               double eps) {
  if (X.rank() != 3) throw shape_error("batchnorm: expected rank-3 input");
  const int B = X.shape[0];
  const int n = X.shape[1];
  const int L = X.shape[2];
  Tensor Y = Tensor::zeros({B, n, L});
  for (int i = 0; i < n; ++i) {
    const double mean = running_mean[static_cast<std::size_t>(i)];
    const double inv = 1.0 / std::sqrt(running_var[static_cast<std::size_t>(i)] + eps);
    const double g = gamma[static_cast<std::size_t>(i)];
    const double be = beta[static_cast<std::size_t>(i)];
    for (int bi = 0; bi < B; ++bi) {
      const double* xrow = X.row(bi, i);
      double* yrow = Y.row(bi, i);
      for (int l = 0; l < L; ++l) {
        yrow[l] = g * (xrow[l] - mean) * inv + be;
      }
    }
  }
  return Y;
}

struct BnGrads {
  Tensor dX;
  std::vector<double> dgamma;
  std::vector<double> dbeta;
};

// Full coupled gradient through the batch mean and variance:
//   dX = gamma * inv_std * (dY - mean(dY) - x_hat * mean(dY * x_hat))
// with means taken over the population.
inline BnGrads bn_backward(const Tensor& dY, const std::vector<double>& gamma,
                           const BnCache& cache) {
  const int B = dY.shape[0];
  const int n = dY.shape[1];
  const int L = dY.shape[2];
  const double P = static_cast<double>(cache.population);

  BnGrads g;
  g.dX = Tensor::zeros({B, n, L});
  g.dgamma.assign(static_cast<std::size_t>(n), 0.0);
  g.dbeta.assign(static_cast<std::size_t>(n), 0.0);

  for (int i = 0; i < n; ++i) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (int bi = 0; bi < B; ++bi) {
      const double* dyrow = dY.row(bi, i);
      const double* hrow = cache.x_hat.row(bi, i);
      for (int l = 0; l < L; ++l) {
        s1 += dyrow[l];
        s2 += dyrow[l] * hrow[l];
      }
    }
    g.dbeta[static_cast<std::size_t>(i)] = s1;
    g.dgamma[static_cast<std::size_t>(i)] = s2;

    const double gi = gamma[static_cast<std::size_t>(i)];
    const double inv = cache.inv_std[static_cast<std::size_t>(i)];
    const double m1 = s1 / P;
    const double m2 = s2 / P;
    for (int bi = 0; bi < B; ++bi) {
      const double* dyrow = dY.row(bi, i);
      const double* hrow = cache.x_hat.row(bi, i);
      double* dxrow = g.dX.row(bi, i);
      for (int l = 0; l < L; ++l) {
        dxrow[l] = gi * inv * (dyrow[l] - m1 - hrow[l] * m2);
      }
    }
  }
  return g;
}

// EMA update of the inference statistics; the stored variance carries the
// P/(P-1) unbiased correction. Called by the training loop, never by the
// forward pass itself.
inline void bn_update_running_stats(const BnCache& cache, double momentum,
                                    std::vector<double>& running_mean,
                                    std::vector<double>& running_var) {
  const double P = static_cast<double>(cache.population);
  const double correction = P > 1.0 ? P / (P - 1.0) : 1.0;
  for (std::size_t i = 0; i < running_mean.size(); ++i) {
    running_mean[i] = (1.0 - momentum) * running_mean[i] + momentum * cache.mean[i];
    running_var[i] = (1.0 - momentum) * running_var[i] +
                     momentum * cache.var[i] * correction;
  }
}

// ---------------------------------------------------------------------------
// Temporal max pooling
// ---------------------------------------------------------------------------

struct PoolResult {
  std::vector<double> values;
  std::vector<int> argmax;  // first position attaining the max
};

inline PoolResult maxpool_time(const Tensor& T) {
  if (T.rank() != 2 || T.shape[1] < 1) {
    throw shape_error("maxpool: expected rank-2 input with L >= 1");
  }
  const int n = T.shape[0];
  const int L = T.shape[1];
  PoolResult r;
  r.values.resize(static_cast<std::size_t>(n));
  r.argmax.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* trow = T.row(i);
    double best = trow[0];
    int arg = 0;
    for (int j = 1; j < L; ++j) {
      if (trow[j] > best) {
        best = trow[j];
        arg = j;
      }
    }
    r.values[static_cast<std::size_t>(i)] = best;
    r.argmax[static_cast<std::size_t>(i)] = arg;
  }
  return r;
}

// Routes each gradient entry to the first max position; accumulates into dT.
inline void maxpool_backward(const PoolResult& pooled,
                             const std::vector<double>& dvalues, Tensor& dT) {
  const int n = dT.shape[0];
  for (int i = 0; i < n; ++i) {
    dT.at(i, pooled.argmax[static_cast<std::size_t>(i)]) +=
        dvalues[static_cast<std::size_t>(i)];
  }
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

inline std::vector<double> dense_forward(const Tensor& Wd,
                                         const std::vector<double>& bd,
                                         const std::vector<double>& x) {
  const int out = Wd.shape[0];
  const int in = Wd.shape[1];
  if (static_cast<int>(x.size()) != in ||
      static_cast<int>(bd.size()) != out) {
    throw shape_error("dense: shape mismatch");
  }
  std::vector<double> y(static_cast<std::size_t>(out));
  for (int j = 0; j < out; ++j) {
    const double* wrow = Wd.row(j);
    double acc = bd[static_cast<std::size_t>(j)];
    for (int k = 0; k < in; ++k) acc += wrow[k] * x[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(j)] = acc;
  }
  return y;
}

struct DenseGrads {
  Tensor dW;
  std::vector<double> db;
  std::vector<double> dx;
};

inline DenseGrads dense_backward(const Tensor& Wd, const std::vector<double>& x,
                                 const std::vector<double>& dy) {
  const int out = Wd.shape[0];
  const int in = Wd.shape[1];
  DenseGrads g;
  g.dW = Tensor::zeros({out, in});
  g.db.assign(dy.begin(), dy.end());
  g.dx.assign(static_cast<std::size_t>(in), 0.0);
  for (int j = 0; j < out; ++j) {
    const double dyj = dy[static_cast<std::size_t>(j)];
    double* dwrow = g.dW.row(j);
    const double* wrow = Wd.row(j);
    for (int k = 0; k < in; ++k) {
      dwrow[k] = dyj * x[static_cast<std::size_t>(k)];
      g.dx[static_cast<std::size_t>(k)] += wrow[k] * dyj;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { relu, tanh };

inline void relu_inplace(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline std::vector<double> relu(std::vector<double> x) {
  relu_inplace(x.data(), x.size());
  return x;
}

// dx from dy given the pre-activation input.
inline void relu_backward_inplace(const double* x_pre, double* dy, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x_pre[i] <= 0.0) dy[i] = 0.0;
  }
}

inline void tanh_inplace(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
}

// dx from dy given the activation output.
inline void tanh_backward_inplace(const double* y_post, double* dy, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dy[i] *= 1.0 - y_post[i] * y_post[i];
}

inline void activation_inplace(Activation act, double* x, std::size_t n) {
  if (act == Activation::relu) relu_inplace(x, n);
  else tanh_inplace(x, n);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

inline std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw shape_error("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

inline std::vector<double> softmax_backward(const std::vector<double>& p,
                                            const std::vector<double>& dp) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += dp[i] * p[i];
  std::vector<double> dlogits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dlogits[i] = p[i] * (dp[i] - dot);
  return dlogits;
}

// ---------------------------------------------------------------------------
// Dropout (inverted)
// ---------------------------------------------------------------------------

// mask[i] holds 0 for dropped coordinates and 1/(1-rate) for survivors, so
// backward is an elementwise product with the same mask.
struct DropoutResult {
  std::vector<double> y;
  std::vector<double> mask;
};

inline DropoutResult dropout_forward(const std::vector<double>& x, double rate,
                                     bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw contract_error("dropout rate must be in [0, 1)");
  }
  DropoutResult r;
  r.y = x;
  r.mask.assign(x.size(), 1.0);
  if (!train || rate == 0.0) return r;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform() < rate) {
      r.mask[i] = 0.0;
      r.y[i] = 0.0;
    } else {
      r.mask[i] = scale;
      r.y[i] = x[i] * scale;
    }
  }
  return r;
}

inline std::vector<double> dropout_backward(const std::vector<double>& mask,
                                            const std::vector<double>& dy) {
  std::vector<double> dx(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
  return dx;
}

}  // namespace csrnet::ops
