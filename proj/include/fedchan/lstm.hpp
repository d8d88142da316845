#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedchan/rng.hpp"
#include "fedchan/sensing.hpp"

namespace fedchan {

// Two-layer LSTM with a dense softmax head, implemented directly on flat
// parameter vectors so models can be broadcast and averaged elementwise.
//
// Flat parameter layout (doubles, in this order):
//   layer 1: W_f, W_i, W_g, W_o   each p x (p + m), row-major, columns [h | x]
//            b_f, b_i, b_g, b_o   each p
//   layer 2: same shape with q x (q + p)
//   dense:   W  output_dim x q row-major, then b  output_dim

struct Architecture {
  int input_dim = 2;  // m
  int p_units = 5;    // first LSTM layer width
  int q_units = 5;    // second LSTM layer width
  int output_dim = 2;

  static std::size_t lstm_layer_param_count(int units, int in) {
    const auto u = static_cast<std::size_t>(units);
    const auto i = static_cast<std::size_t>(in);
    return 4 * u * (u + i) + 4 * u;
  }

  std::size_t param_count() const {
    return lstm_layer_param_count(p_units, input_dim) + lstm_layer_param_count(q_units, p_units) +
           static_cast<std::size_t>(output_dim) * q_units + output_dim;
  }

  std::size_t layer2_offset() const { return lstm_layer_param_count(p_units, input_dim); }
  std::size_t dense_offset() const { return layer2_offset() + lstm_layer_param_count(q_units, p_units); }

  void validate() const {
    if (input_dim < 1 || p_units < 1 || q_units < 1 || output_dim < 2) {
      throw std::invalid_argument("Architecture: dimensions out of range");
    }
  }

  bool operator==(const Architecture&) const = default;
};

struct ParamVector {
  Architecture arch;
  std::vector<double> values;
};

inline ParamVector zeros_like(const Architecture& arch) {
  return {arch, std::vector<double>(arch.param_count(), 0.0)};
}

// Uniform init on [-0.1, 0.1]. Nodes that intend to average their models
// must share the init seed so the parameter coordinates stay comparable.
inline ParamVector init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ParamVector pv{arch, std::vector<double>(arch.param_count())};
  Rng rng(seed);
  for (double& v : pv.values) v = rng.uniform(-0.1, 0.1);
  return pv;
}

// Cell and hidden state for both layers; zeroed at the start of each window.
struct LstmState {
  std::vector<double> h1, c1, h2, c2;

  static LstmState zero(const Architecture& arch) {
    LstmState s;
    s.h1.assign(arch.p_units, 0.0);
    s.c1.assign(arch.p_units, 0.0);
    s.h2.assign(arch.q_units, 0.0);
    s.c2.assign(arch.q_units, 0.0);
    return s;
  }
};

namespace detail {

template <typename Scalar>
struct LstmLayerViewT {
  Scalar* w[4];  // gate order f, i, g, o
  Scalar* b[4];
  int units;
  int in;
};

using LstmLayerView = LstmLayerViewT<const double>;
using LstmLayerGradView = LstmLayerViewT<double>;

template <typename Scalar, typename Vec>
LstmLayerViewT<Scalar> make_layer_view(Vec& values, const Architecture& arch, int layer) {
  LstmLayerViewT<Scalar> v;
  std::size_t off;
  if (layer == 0) {
    v.units = arch.p_units;
    v.in = arch.input_dim;
    off = 0;
  } else {
    v.units = arch.q_units;
    v.in = arch.p_units;
    off = arch.layer2_offset();
  }
  const std::size_t wsize = static_cast<std::size_t>(v.units) * (v.units + v.in);
  for (int g = 0; g < 4; ++g) v.w[g] = values.data() + off + static_cast<std::size_t>(g) * wsize;
  for (int g = 0; g < 4; ++g) v.b[g] = values.data() + off + 4 * wsize + static_cast<std::size_t>(g) * v.units;
  return v;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One step of the standard LSTM recurrence; writes gate activations and the
// new (h, c) into the provided buffers. z must be [h_prev | x].
inline void cell_step_core(const LstmLayerView& layer, const std::vector<double>& z,
                           const double* c_prev, double* f, double* i, double* g, double* o,
                           double* c_out, double* tc_out, double* h_out) {
  const int u = layer.units;
  const int n = layer.units + layer.in;
  for (int r = 0; r < u; ++r) {
    double a_f = layer.b[0][r];
    double a_i = layer.b[1][r];
    double a_g = layer.b[2][r];
    double a_o = layer.b[3][r];
    const double* wf = layer.w[0] + static_cast<std::size_t>(r) * n;
    const double* wi = layer.w[1] + static_cast<std::size_t>(r) * n;
    const double* wg = layer.w[2] + static_cast<std::size_t>(r) * n;
    const double* wo = layer.w[3] + static_cast<std::size_t>(r) * n;
    for (int j = 0; j < n; ++j) {
      const double zj = z[static_cast<std::size_t>(j)];
      a_f += wf[j] * zj;
      a_i += wi[j] * zj;
      a_g += wg[j] * zj;
      a_o += wo[j] * zj;
    }
    f[r] = sigmoid(a_f);
    i[r] = sigmoid(a_i);
    g[r] = std::tanh(a_g);
    o[r] = sigmoid(a_o);
    const double c = f[r] * c_prev[r] + i[r] * g[r];
    c_out[r] = c;
    tc_out[r] = std::tanh(c);
    h_out[r] = o[r] * tc_out[r];
  }
}

}  // namespace detail

// Public single-step interface: x runs through one layer's gates given the
// previous (h, c) of that layer.
inline void lstm_cell_step(const ParamVector& params, int layer, std::span<const double> x,
                           std::span<const double> h_prev, std::span<const double> c_prev,
                           std::vector<double>& h_out, std::vector<double>& c_out) {
  if (layer != 0 && layer != 1) throw std::invalid_argument("lstm_cell_step: layer must be 0 or 1");
  const auto view = detail::make_layer_view<const double>(params.values, params.arch, layer);
  if (static_cast<int>(x.size()) != view.in || static_cast<int>(h_prev.size()) != view.units ||
      static_cast<int>(c_prev.size()) != view.units) {
    throw std::invalid_argument("lstm_cell_step: dimension mismatch");
  }
  std::vector<double> z(h_prev.begin(), h_prev.end());
  z.insert(z.end(), x.begin(), x.end());
  const auto u = static_cast<std::size_t>(view.units);
  std::vector<double> f(u), i(u), g(u), o(u), tc(u);
  h_out.assign(u, 0.0);
  c_out.assign(u, 0.0);
  detail::cell_step_core(view, z, c_prev.data(), f.data(), i.data(), g.data(), o.data(),
                         c_out.data(), tc.data(), h_out.data());
}

// Numerically stable softmax (max subtraction). Rejects NaN input.
inline std::vector<double> softmax(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("softmax: empty input");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) {
    if (std::isnan(v)) throw std::invalid_argument("softmax: NaN input");
    mx = std::max(mx, v);
  }
  std::vector<double> p(x.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    p[j] = std::exp(x[j] - mx);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Cross-entropy of a one-hot target against a predicted PMF. The prediction
// is clamped at 1e-12 before the log.
inline double cross_entropy(const std::vector<double>& pred, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= pred.size()) {
    throw std::invalid_argument("cross_entropy: target out of range");
  }
  double sum = 0.0;
  for (double v : pred) {
    if (std::isnan(v) || v < -1e-12 || v > 1.0 + 1e-9) throw std::invalid_argument("cross_entropy: invalid PMF");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("cross_entropy: PMF does not sum to 1");
  return -std::log(std::max(pred[static_cast<std::size_t>(target)], 1e-12));
}

namespace detail {

// Everything the backward pass needs from one forward step.
struct StepCache {
  std::vector<double> z1, f1, i1, g1, o1, c1, tc1, h1;
  std::vector<double> z2, f2, i2, g2, o2, c2, tc2, h2;
  std::vector<double> logits, probs;
};

inline void check_window(const Architecture& arch, const std::vector<std::vector<double>>& window) {
  if (window.empty()) throw std::invalid_argument("forward: empty window");
  for (const auto& x : window) {
    if (static_cast<int>(x.size()) != arch.input_dim) throw std::invalid_argument("forward: input dimension mismatch");
  }
}

inline void forward_cached(const ParamVector& params, const std::vector<std::vector<double>>& window,
                           std::vector<StepCache>& steps) {
  const Architecture& arch = params.arch;
  check_window(arch, window);
  const auto l1 = make_layer_view<const double>(params.values, arch, 0);
  const auto l2 = make_layer_view<const double>(params.values, arch, 1);
  const double* dw = params.values.data() + arch.dense_offset();
  const double* db = dw + static_cast<std::size_t>(arch.output_dim) * arch.q_units;

  const auto p = static_cast<std::size_t>(arch.p_units);
  const auto q = static_cast<std::size_t>(arch.q_units);
  steps.assign(window.size(), StepCache{});

  std::vector<double> h1_prev(p, 0.0), c1_prev(p, 0.0), h2_prev(q, 0.0), c2_prev(q, 0.0);
  for (std::size_t t = 0; t < window.size(); ++t) {
    StepCache& s = steps[t];
    s.z1.assign(h1_prev.begin(), h1_prev.end());
    s.z1.insert(s.z1.end(), window[t].begin(), window[t].end());
    s.f1.resize(p); s.i1.resize(p); s.g1.resize(p); s.o1.resize(p);
    s.c1.resize(p); s.tc1.resize(p); s.h1.resize(p);
    cell_step_core(l1, s.z1, c1_prev.data(), s.f1.data(), s.i1.data(), s.g1.data(), s.o1.data(),
                   s.c1.data(), s.tc1.data(), s.h1.data());

    s.z2.assign(h2_prev.begin(), h2_prev.end());
    s.z2.insert(s.z2.end(), s.h1.begin(), s.h1.end());
    s.f2.resize(q); s.i2.resize(q); s.g2.resize(q); s.o2.resize(q);
    s.c2.resize(q); s.tc2.resize(q); s.h2.resize(q);
    cell_step_core(l2, s.z2, c2_prev.data(), s.f2.data(), s.i2.data(), s.g2.data(), s.o2.data(),
                   s.c2.data(), s.tc2.data(), s.h2.data());

    s.logits.assign(arch.output_dim, 0.0);
    for (int r = 0; r < arch.output_dim; ++r) {
      double acc = db[r];
      const double* wr = dw + static_cast<std::size_t>(r) * q;
      for (std::size_t j = 0; j < q; ++j) acc += wr[j] * s.h2[j];
      s.logits[static_cast<std::size_t>(r)] = acc;
    }
    s.probs = softmax(s.logits);

    h1_prev = s.h1;
    c1_prev = s.c1;
    h2_prev = s.h2;
    c2_prev = s.c2;
  }
}

// Backward through one layer at one step. dh/dc are the incoming gradients
// for this step's outputs; on return dh_prev/dc_prev hold the gradients for
// the previous step and dz the gradient of the concatenated input.
inline void cell_step_backward(const LstmLayerView& layer, const LstmLayerGradView& grad,
                               const StepCache& s, bool layer1, const double* c_prev,
                               const std::vector<double>& dh, const std::vector<double>& dc,
                               std::vector<double>& dh_prev, std::vector<double>& dc_prev,
                               std::vector<double>& dz) {
  const int u = layer.units;
  const int n = layer.units + layer.in;
  const std::vector<double>& f = layer1 ? s.f1 : s.f2;
  const std::vector<double>& i = layer1 ? s.i1 : s.i2;
  const std::vector<double>& g = layer1 ? s.g1 : s.g2;
  const std::vector<double>& o = layer1 ? s.o1 : s.o2;
  const std::vector<double>& tc = layer1 ? s.tc1 : s.tc2;
  const std::vector<double>& z = layer1 ? s.z1 : s.z2;

  dz.assign(static_cast<std::size_t>(n), 0.0);
  dc_prev.assign(static_cast<std::size_t>(u), 0.0);
  for (int r = 0; r < u; ++r) {
    const double d_o = dh[static_cast<std::size_t>(r)] * tc[static_cast<std::size_t>(r)];
    const double da_o = d_o * o[static_cast<std::size_t>(r)] * (1.0 - o[static_cast<std::size_t>(r)]);
    const double dct = dc[static_cast<std::size_t>(r)] +
                       dh[static_cast<std::size_t>(r)] * o[static_cast<std::size_t>(r)] *
                           (1.0 - tc[static_cast<std::size_t>(r)] * tc[static_cast<std::size_t>(r)]);
    const double d_f = dct * c_prev[r];
    const double da_f = d_f * f[static_cast<std::size_t>(r)] * (1.0 - f[static_cast<std::size_t>(r)]);
    const double d_i = dct * g[static_cast<std::size_t>(r)];
    const double da_i = d_i * i[static_cast<std::size_t>(r)] * (1.0 - i[static_cast<std::size_t>(r)]);
    const double d_g = dct * i[static_cast<std::size_t>(r)];
    const double da_g = d_g * (1.0 - g[static_cast<std::size_t>(r)] * g[static_cast<std::size_t>(r)]);
    dc_prev[static_cast<std::size_t>(r)] = dct * f[static_cast<std::size_t>(r)];

    const double da[4] = {da_f, da_i, da_g, da_o};
    for (int gate = 0; gate < 4; ++gate) {
      double* wg = grad.w[gate] + static_cast<std::size_t>(r) * n;
      const double* wl = layer.w[gate] + static_cast<std::size_t>(r) * n;
      const double a = da[gate];
      for (int j = 0; j < n; ++j) {
        wg[j] += a * z[static_cast<std::size_t>(j)];
        dz[static_cast<std::size_t>(j)] += wl[j] * a;
      }
      grad.b[gate][r] += a;
    }
  }
  dh_prev.assign(dz.begin(), dz.begin() + u);
}

}  // namespace detail

struct ForwardResult {
  std::vector<std::vector<double>> logits;  // one vector per step
  LstmState final_state;
};

// Runs the full network over a window of one-hot inputs. State starts at zero.
inline ForwardResult forward(const ParamVector& params, const std::vector<std::vector<double>>& window) {
  std::vector<detail::StepCache> steps;
  detail::forward_cached(params, window, steps);
  ForwardResult r;
  r.logits.reserve(steps.size());
  for (const auto& s : steps) r.logits.push_back(s.logits);
  const auto& last = steps.back();
  r.final_state = {last.h1, last.c1, last.h2, last.c2};
  return r;
}

// Argmax class per step; ties break toward class 0.
inline std::vector<int> predict(const ParamVector& params, const std::vector<std::vector<double>>& window) {
  std::vector<detail::StepCache> steps;
  detail::forward_cached(params, window, steps);
  std::vector<int> classes;
  classes.reserve(steps.size());
  for (const auto& s : steps) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(s.logits.size()); ++j) {
      if (s.logits[static_cast<std::size_t>(j)] > s.logits[static_cast<std::size_t>(best)]) best = j;
    }
    classes.push_back(best);
  }
  return classes;
}

namespace detail {

// Computes the gradient of the mean per-step cross-entropy over the window
// and returns that loss. Also counts argmax hits for training accuracy.
inline double backward_impl(const ParamVector& params, const std::vector<std::vector<double>>& window,
                            const std::vector<int>& targets, ParamVector& grad_out,
                            std::size_t* correct_steps = nullptr) {
  const Architecture& arch = params.arch;
  if (targets.size() != window.size()) throw std::invalid_argument("backward: targets/window length mismatch");
  for (int y : targets) {
    if (y < 0 || y >= arch.output_dim) throw std::invalid_argument("backward: target out of range");
  }

  std::vector<StepCache> steps;
  forward_cached(params, window, steps);
  const auto T = window.size();

  grad_out = zeros_like(arch);
  const auto l1 = make_layer_view<const double>(params.values, arch, 0);
  const auto l2 = make_layer_view<const double>(params.values, arch, 1);
  const auto g1 = make_layer_view<double>(grad_out.values, arch, 0);
  const auto g2 = make_layer_view<double>(grad_out.values, arch, 1);
  const double* dw = params.values.data() + arch.dense_offset();
  double* gdw = grad_out.values.data() + arch.dense_offset();
  double* gdb = gdw + static_cast<std::size_t>(arch.output_dim) * arch.q_units;

  const auto p = static_cast<std::size_t>(arch.p_units);
  const auto q = static_cast<std::size_t>(arch.q_units);

  double loss = 0.0;
  std::size_t hits = 0;
  std::vector<double> dh1_next(p, 0.0), dc1_next(p, 0.0), dh2_next(q, 0.0), dc2_next(q, 0.0);
  std::vector<double> dh1(p), dh2(q), dz1, dz2, dh1_prev, dc1_prev, dh2_prev, dc2_prev;
  const std::vector<double> zeros_p(p, 0.0), zeros_q(q, 0.0);

  for (std::size_t t = T; t-- > 0;) {
    const StepCache& s = steps[t];
    const int y = targets[t];
    loss += -std::log(std::max(s.probs[static_cast<std::size_t>(y)], 1e-12));
    if (correct_steps != nullptr) {
      int best = 0;
      for (int j = 1; j < arch.output_dim; ++j) {
        if (s.logits[static_cast<std::size_t>(j)] > s.logits[static_cast<std::size_t>(best)]) best = j;
      }
      if (best == y) ++hits;
    }

    // dense head: dL/dlogits = (p - onehot(y)) / T
    std::fill(dh2.begin(), dh2.end(), 0.0);
    for (int r = 0; r < arch.output_dim; ++r) {
      const double du = (s.probs[static_cast<std::size_t>(r)] - (r == y ? 1.0 : 0.0)) / static_cast<double>(T);
      const double* wr = dw + static_cast<std::size_t>(r) * q;
      double* gwr = gdw + static_cast<std::size_t>(r) * q;
      for (std::size_t j = 0; j < q; ++j) {
        gwr[j] += du * s.h2[j];
        dh2[j] += wr[j] * du;
      }
      gdb[r] += du;
    }
    for (std::size_t j = 0; j < q; ++j) dh2[j] += dh2_next[j];

    const double* c2_prev = (t == 0) ? zeros_q.data() : steps[t - 1].c2.data();
    detail::cell_step_backward(l2, g2, s, false, c2_prev, dh2, dc2_next, dh2_prev, dc2_prev, dz2);
    dh2_next = dh2_prev;
    dc2_next = dc2_prev;

    for (std::size_t j = 0; j < p; ++j) dh1[j] = dz2[q + j] + dh1_next[j];
    const double* c1_prev = (t == 0) ? zeros_p.data() : steps[t - 1].c1.data();
    detail::cell_step_backward(l1, g1, s, true, c1_prev, dh1, dc1_next, dh1_prev, dc1_prev, dz1);
    dh1_next = dh1_prev;
    dc1_next = dc1_prev;
  }

  if (correct_steps != nullptr) *correct_steps = hits;
  return loss / static_cast<double>(T);
}

}  // namespace detail

// Exact gradient of the mean cross-entropy over the window, via
// backpropagation through time.
inline ParamVector backward(const ParamVector& params, const std::vector<std::vector<double>>& window,
                            const std::vector<int>& targets) {
  ParamVector grad = zeros_like(params.arch);
  detail::backward_impl(params, window, targets, grad);
  return grad;
}

inline std::vector<std::vector<double>> expand_window(const std::uint8_t* classes, int window_len, int m) {
  std::vector<std::vector<double>> window;
  window.reserve(static_cast<std::size_t>(window_len));
  for (int j = 0; j < window_len; ++j) window.push_back(one_hot(classes[j], m));
  return window;
}

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Accuracy and mean loss of per-step predictions over every window.
inline EvalResult evaluate(const ParamVector& params, const Dataset& ds) {
  if (ds.n_windows() == 0) throw std::invalid_argument("evaluate: empty dataset");
  std::size_t hits = 0;
  double loss = 0.0;
  std::vector<detail::StepCache> steps;
  for (std::size_t w = 0; w < ds.n_windows(); ++w) {
    const auto window = expand_window(ds.window_inputs(w), ds.window_len, ds.m);
    detail::forward_cached(params, window, steps);
    const std::uint8_t* targets = ds.window_targets(w);
    for (int j = 0; j < ds.window_len; ++j) {
      const auto& s = steps[static_cast<std::size_t>(j)];
      const int y = targets[j];
      loss += -std::log(std::max(s.probs[static_cast<std::size_t>(y)], 1e-12));
      int best = 0;
      for (int r = 1; r < static_cast<int>(s.probs.size()); ++r) {
        if (s.probs[static_cast<std::size_t>(r)] > s.probs[static_cast<std::size_t>(best)]) best = r;
      }
      if (best == y) ++hits;
    }
  }
  const auto total = static_cast<double>(ds.n_windows() * static_cast<std::size_t>(ds.window_len));
  return {static_cast<double>(hits) / total, loss / total};
}

struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct TrainOptions {
  int epochs = 1;
  double learning_rate = 0.05;
  double clip_norm = 5.0;  // global gradient L2 norm ceiling
  std::uint64_t shuffle_seed = 0;
};

struct TrainResult {
  ParamVector params;
  std::vector<EpochMetrics> metrics;
  bool diverged = false;
  int diverged_epoch = -1;
};

// Plain SGD, one update per window, window order reshuffled every epoch.
// A non-finite loss stops training and flags the result as diverged.
inline TrainResult train(const ParamVector& initial, const Dataset& train_ds, const Dataset* val_ds,
                         const TrainOptions& opts) {
  if (opts.epochs < 0) throw std::invalid_argument("train: negative epoch count");
  if (opts.learning_rate <= 0.0) throw std::invalid_argument("train: non-positive learning rate");
  if (train_ds.n_windows() == 0) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  result.params = initial;
  ParamVector grad = zeros_like(initial.arch);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = shuffled_indices(train_ds.n_windows(), mix_seed(opts.shuffle_seed, static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    std::size_t hits = 0;
    bool finite = true;
    for (const std::size_t w : order) {
      const auto window = expand_window(train_ds.window_inputs(w), train_ds.window_len, train_ds.m);
      std::vector<int> targets(train_ds.window_targets(w), train_ds.window_targets(w) + train_ds.window_len);
      std::size_t window_hits = 0;
      const double loss = detail::backward_impl(result.params, window, targets, grad, &window_hits);
      if (!std::isfinite(loss)) {
        finite = false;
        break;
      }
      loss_sum += loss;
      hits += window_hits;

      double norm_sq = 0.0;
      for (double v : grad.values) norm_sq += v * v;
      const double norm = std::sqrt(norm_sq);
      const double scale = (opts.clip_norm > 0.0 && norm > opts.clip_norm) ? opts.clip_norm / norm : 1.0;
      for (std::size_t k = 0; k < grad.values.size(); ++k) {
        result.params.values[k] -= opts.learning_rate * scale * grad.values[k];
      }
    }

    if (!finite) {
      result.diverged = true;
      result.diverged_epoch = epoch;
      break;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.mean_loss = loss_sum / static_cast<double>(train_ds.n_windows());
    m.train_acc = static_cast<double>(hits) /
                  static_cast<double>(train_ds.n_windows() * static_cast<std::size_t>(train_ds.window_len));
    if (val_ds != nullptr) m.val_acc = evaluate(result.params, *val_ds).accuracy;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(m);
  }
  return result;
}

}  // namespace fedchan
