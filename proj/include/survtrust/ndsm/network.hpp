#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "survtrust/core/error.hpp"
#include "survtrust/core/random.hpp"
#include "survtrust/ndsm/isd.hpp"
#include "survtrust/ndsm/losses.hpp"

namespace survtrust::ndsm {

enum class Activation { relu, tanh };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InputError("unknown activation '" + s + "'");
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Dense feed-forward network D -> H... -> T+1 with all parameters in one flat
// buffer: per layer, weights (out x in, row-major) followed by biases.
struct ModelState {
  std::vector<int> widths;
  Activation activation = Activation::relu;
  Objective objective = Objective::nll;
  std::uint64_t seed = 0;
  std::vector<double> params;
  AdamState adam;
  std::vector<double> cut_points;
  std::vector<std::string> feature_names;

  std::size_t layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return static_cast<std::size_t>(widths.front()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(widths.back()); }
  int intervals() const { return widths.back() - 1; }

  std::size_t weight_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < l; ++i)
      off += static_cast<std::size_t>(widths[i] + 1) * static_cast<std::size_t>(widths[i + 1]);
    return off;
  }
  std::size_t bias_offset(std::size_t l) const {
    return weight_offset(l) + static_cast<std::size_t>(widths[l]) * static_cast<std::size_t>(widths[l + 1]);
  }

  static std::size_t parameter_count(std::span<const int> widths) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      n += static_cast<std::size_t>(widths[i] + 1) * static_cast<std::size_t>(widths[i + 1]);
    return n;
  }

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct ArchitectureOptions {
  std::vector<int> hidden{128, 128};
  Activation activation = Activation::relu;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases. First-layer
// weights are drawn per input column from a stream keyed by the column name,
// so withholding a column leaves the others' initial weights unchanged.
inline ModelState init_model(std::size_t input_dim, int intervals, Objective objective, std::uint64_t seed,
                             const ArchitectureOptions& arch = {}, std::vector<std::string> feature_names = {}) {
  if (input_dim == 0) throw InputError("model needs at least one input");
  if (intervals < 1) throw InputError("model needs at least one time interval");
  if (!feature_names.empty() && feature_names.size() != input_dim)
    throw InputError("feature name count does not match input dimension");
  ModelState m;
  m.widths.push_back(static_cast<int>(input_dim));
  for (int h : arch.hidden) {
    if (h < 1) throw InputError("hidden widths must be positive");
    m.widths.push_back(h);
  }
  m.widths.push_back(intervals + 1);
  m.activation = arch.activation;
  m.objective = objective;
  m.seed = seed;
  m.feature_names = std::move(feature_names);
  m.params.assign(ModelState::parameter_count(m.widths), 0.0);

  for (std::size_t l = 0; l < m.layers(); ++l) {
    const auto in = static_cast<std::size_t>(m.widths[l]);
    const auto out = static_cast<std::size_t>(m.widths[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    double* w = m.params.data() + m.weight_offset(l);
    if (l == 0) {
      for (std::size_t j = 0; j < in; ++j) {
        const std::uint64_t key = m.feature_names.empty() ? j : fnv1a(m.feature_names[j]);
        Rng rng(derive_seed(seed, {0, 1, key}));
        for (std::size_t o = 0; o < out; ++o) w[o * in + j] = rng.uniform(-bound, bound);
      }
    } else {
      Rng rng(derive_seed(seed, {l, 0}));
      for (std::size_t i = 0; i < in * out; ++i) w[i] = rng.uniform(-bound, bound);
    }
    Rng brng(derive_seed(seed, {l, 2}));
    double* b = m.params.data() + m.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) b[o] = brng.uniform(-bound, bound);
  }
  m.adam.m.assign(m.params.size(), 0.0);
  m.adam.v.assign(m.params.size(), 0.0);
  return m;
}

// Per-sample activations kept for back-propagation.
struct ForwardCache {
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // post[0] = input, post[l+1] = act(pre[l]) for hidden layers

  std::span<const double> logits() const { return pre.back(); }
};

inline double activate(Activation a, double x) { return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x); }

inline double activate_grad(Activation a, double pre, double post) {
  return a == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

inline void forward(const ModelState& m, std::span<const double> x, ForwardCache& cache) {
  if (x.size() != m.input_dim())
    throw InputError("input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(m.input_dim()));
  const std::size_t L = m.layers();
  cache.pre.resize(L);
  cache.post.resize(L);
  cache.post[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const auto in = static_cast<std::size_t>(m.widths[l]);
    const auto out = static_cast<std::size_t>(m.widths[l + 1]);
    const double* w = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    const auto& a = cache.post[l];
    auto& z = cache.pre[l];
    z.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < L) {
      auto& h = cache.post[l + 1];
      h.resize(out);
      for (std::size_t o = 0; o < out; ++o) h[o] = activate(m.activation, z[o]);
    }
  }
}

// Accumulates parameter gradients for one sample given dL/dlogits.
inline void backward(const ModelState& m, const ForwardCache& cache, std::span<const double> dlogits,
                     std::span<double> grad) {
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  std::vector<double> prev;
  for (std::size_t l = m.layers(); l-- > 0;) {
    const auto in = static_cast<std::size_t>(m.widths[l]);
    const auto out = static_cast<std::size_t>(m.widths[l + 1]);
    const double* w = m.params.data() + m.weight_offset(l);
    double* gw = grad.data() + m.weight_offset(l);
    double* gb = grad.data() + m.bias_offset(l);
    const auto& a = cache.post[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < in; ++i) prev[i] *= activate_grad(m.activation, cache.pre[l - 1][i], a[i]);
    delta.swap(prev);
  }
}

inline std::vector<double> predict_logits(const ModelState& m, std::span<const double> x) {
  ForwardCache cache;
  forward(m, x, cache);
  return cache.pre.back();
}

inline Isd predict_isd(const ModelState& m, std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) throw InputError("non-finite model input");
  return Isd::from_pmf(pmf_from_logits(m.objective, predict_logits(m, x)));
}

template <class Rows>
std::vector<Isd> predict_all(const ModelState& m, const Rows& rows) {
  std::vector<Isd> out;
  out.reserve(rows.size());
  for (const auto& x : rows) out.push_back(predict_isd(m, x));
  return out;
}

// ---------------------------------------------------------------- optimizer

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_step(ModelState& m, std::span<const double> grad, const AdamOptions& opt) {
  auto& st = m.adam;
  if (st.m.size() != m.params.size()) st.m.assign(m.params.size(), 0.0);
  if (st.v.size() != m.params.size()) st.v.assign(m.params.size(), 0.0);
  ++st.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const double g = grad[i];
    st.m[i] = opt.beta1 * st.m[i] + (1.0 - opt.beta1) * g;
    st.v[i] = opt.beta2 * st.v[i] + (1.0 - opt.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    m.params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

}  // namespace survtrust::ndsm
