#pragma once

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "garm/asset_io.hpp"
#include "garm/core.hpp"
#include "garm/image.hpp"

// Minimal dense-network engine: SiLU or Softplus hidden layers, linear
// output, exact reverse-mode gradients, Adam. Big enough for flattened-map
// denoisers and the vertex displacement field, nothing more.

namespace garm {

enum class Activation { silu, softplus };

inline const char* activation_name(Activation a) {
  return a == Activation::silu ? "silu" : "softplus";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "silu") return Activation::silu;
  if (s == "softplus") return Activation::softplus;
  throw std::invalid_argument("unknown activation: " + s);
}

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double act_value(Activation a, double x) {
  if (a == Activation::silu) return x * sigmoid(x);
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double act_deriv(Activation a, double x) {
  double s = sigmoid(x);
  if (a == Activation::silu) return s * (1.0 + x * (1.0 - s));
  return s;
}

}  // namespace detail

// Fully connected net. All parameters live in one flat vector, layer-major
// [W0, b0, W1, b1, ...] with column-major weight blocks, so the optimizer
// and the serializer never need to know the layout.
struct DenseNet {
  std::vector<int> widths;  // [input, hidden..., output]
  Activation act = Activation::silu;
  // Trailing slice of the input fed by time_embedding(); 0 for nets that
  // are not time-conditioned. Bookkeeping for callers, not used in eval.
  int time_embed = 0;
  VecX params;

  int num_layers() const { return int(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }

  int weight_offset(int l) const {
    int off = 0;
    for (int i = 0; i < l; i++) off += widths[i + 1] * (widths[i] + 1);
    return off;
  }
  Eigen::Map<MatX> weight(int l) {
    return {params.data() + weight_offset(l), widths[l + 1], widths[l]};
  }
  Eigen::Map<const MatX> weight(int l) const {
    return {params.data() + weight_offset(l), widths[l + 1], widths[l]};
  }
  Eigen::Map<VecX> bias(int l) {
    return {params.data() + weight_offset(l) + widths[l + 1] * widths[l],
            widths[l + 1]};
  }
  Eigen::Map<const VecX> bias(int l) const {
    return {params.data() + weight_offset(l) + widths[l + 1] * widths[l],
            widths[l + 1]};
  }
};

inline int dense_param_count(const std::vector<int>& widths) {
  if (widths.size() < 2)
    throw std::invalid_argument("dense net needs at least input and output");
  int n = 0;
  for (size_t i = 0; i + 1 < widths.size(); i++) {
    if (widths[i] <= 0 || widths[i + 1] <= 0)
      throw std::invalid_argument("dense net widths must be positive");
    n += widths[i + 1] * (widths[i] + 1);
  }
  return n;
}

// Weights ~ N(0, 1/fan_in), biases zero.
inline DenseNet make_dense_net(const std::vector<int>& widths, Rng& rng,
                               Activation act = Activation::silu,
                               int time_embed = 0) {
  DenseNet net;
  net.widths = widths;
  net.act = act;
  net.time_embed = time_embed;
  net.params = VecX::Zero(dense_param_count(widths));
  if (time_embed < 0 || time_embed >= widths.front())
    throw std::invalid_argument("time embedding must fit inside the input");
  for (int l = 0; l < net.num_layers(); l++) {
    auto w = net.weight(l);
    double scale = 1.0 / std::sqrt(double(net.widths[l]));
    for (int j = 0; j < w.cols(); j++)
      for (int i = 0; i < w.rows(); i++) w(i, j) = scale * rng.normal();
  }
  return net;
}

inline void zero_layer(DenseNet& net, int l) {
  if (l < 0 || l >= net.num_layers())
    throw std::invalid_argument("zero_layer: no such layer");
  net.weight(l).setZero();
  net.bias(l).setZero();
}

// Standard sinusoidal position features of an integer or real step; width
// must be even, first half sines, second half cosines.
inline VecX time_embedding(double t, int width) {
  if (width <= 0 || width % 2 != 0)
    throw std::invalid_argument("time embedding width must be positive even");
  int half = width / 2;
  VecX e(width);
  for (int i = 0; i < half; i++) {
    double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

struct NetEval {
  MatX output;   // output width x batch
  VecX dparams;  // summed over the batch; empty when no gradient requested
  MatX dinput;   // input width x batch; empty when no gradient requested
};

// Forward and, when an upstream gradient is supplied, exact reverse-mode
// gradients of sum_b upstream_b . output_b for every parameter and input.
// Inputs are columns.
inline NetEval net_eval_grad_batch(const DenseNet& net, const MatX& inputs,
                                   const MatX* upstream = nullptr) {
  if (inputs.rows() != net.input_width())
    throw std::invalid_argument(
        str_format("net input width %d, got %d", net.input_width(),
                   int(inputs.rows())));
  if (upstream && (upstream->rows() != net.output_width() ||
                   upstream->cols() != inputs.cols()))
    throw std::invalid_argument("upstream gradient shape mismatch");
  int L = net.num_layers();
  std::vector<MatX> acts(L + 1);  // acts[0] = input, acts[l] = h_l
  std::vector<MatX> pre(L);       // pre-activations a_l
  acts[0] = inputs;
  for (int l = 0; l < L; l++) {
    pre[l] = net.weight(l) * acts[l];
    pre[l].colwise() += net.bias(l);
    if (l + 1 == L) {
      acts[l + 1] = pre[l];
    } else {
      acts[l + 1] = pre[l].unaryExpr(
          [&](double x) { return detail::act_value(net.act, x); });
    }
  }
  NetEval ev;
  ev.output = acts[L];
  if (!upstream) return ev;

  ev.dparams = VecX::Zero(net.params.size());
  MatX delta = *upstream;
  for (int l = L - 1; l >= 0; l--) {
    Eigen::Map<MatX> dw(ev.dparams.data() + net.weight_offset(l),
                        net.widths[l + 1], net.widths[l]);
    Eigen::Map<VecX> db(
        ev.dparams.data() + net.weight_offset(l) +
            net.widths[l + 1] * net.widths[l],
        net.widths[l + 1]);
    dw = delta * acts[l].transpose();
    db = delta.rowwise().sum();
    MatX back = net.weight(l).transpose() * delta;
    if (l == 0) {
      ev.dinput = back;
    } else {
      delta = back.cwiseProduct(pre[l - 1].unaryExpr(
          [&](double x) { return detail::act_deriv(net.act, x); }));
    }
  }
  return ev;
}

inline NetEval net_eval_grad(const DenseNet& net, const VecX& input,
                             const VecX* upstream = nullptr) {
  MatX in = input;
  if (!upstream) return net_eval_grad_batch(net, in, nullptr);
  MatX up = *upstream;
  return net_eval_grad_batch(net, in, &up);
}

inline VecX net_forward(const DenseNet& net, const VecX& input) {
  return net_eval_grad(net, input).output.col(0);
}

// --- Adam ----------------------------------------------------------------

struct AdamState {
  VecX m, v;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_step(VecX& params, const VecX& grad, AdamState& st) {
  if (grad.size() != params.size())
    throw std::invalid_argument(
        str_format("adam_step: %d params, %d gradients", int(params.size()),
                   int(grad.size())));
  if (!grad.allFinite())
    throw std::runtime_error("adam_step: non-finite gradient");
  if (st.m.size() != params.size()) {
    st.m = VecX::Zero(params.size());
    st.v = VecX::Zero(params.size());
  }
  st.step_count++;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  double c1 = 1.0 - std::pow(st.beta1, double(st.step_count));
  double c2 = 1.0 - std::pow(st.beta2, double(st.step_count));
  params -= (st.lr / c1) * st.m.cwiseQuotient(
                ((st.v / c2).cwiseSqrt().array() + st.eps).matrix());
}

// Adam with a revert-on-increase guard: a step that raises the loss is
// rolled back, the moments are cleared and the rate halved; accepted steps
// recover the rate toward base_lr. Keeps recorded epoch losses monotone.
struct GuardedAdam {
  AdamState state;
  double base_lr = 1e-3;

  explicit GuardedAdam(double lr = 1e-3) : base_lr(lr) { state.lr = lr; }

  // loss_fn() re-evaluates the objective at the current parameters.
  template <class F>
  bool step(VecX& params, const VecX& grad, double loss_before, F&& loss_fn,
            double* loss_after = nullptr) {
    VecX backup = params;
    AdamState sbak = state;
    adam_step(params, grad, state);
    double after = loss_fn();
    if (std::isfinite(after) && after <= loss_before) {
      state.lr = std::min(state.lr * 1.25, base_lr);
      if (loss_after) *loss_after = after;
      return true;
    }
    params = backup;
    state = sbak;
    state.m.setZero();
    state.v.setZero();
    state.step_count = 0;
    state.lr *= 0.5;
    if (loss_after) *loss_after = loss_before;
    return false;
  }
};

// --- Displacement field ---------------------------------------------------

// Per-vertex displacement net: input [v ‖ v̄], output a 3D offset.
inline void validate_displacement_net(const DenseNet& f) {
  if (f.input_width() != 6 || f.output_width() != 3)
    throw std::invalid_argument(
        str_format("displacement net must map 6 -> 3, has %d -> %d",
                   f.input_width(), f.output_width()));
}

inline DenseNet make_displacement_net(Rng& rng) {
  DenseNet f = make_dense_net({6, 256, 256, 256, 3}, rng,
                              Activation::softplus);
  zero_layer(f, f.num_layers() - 1);  // start at the identity mesh
  return f;
}

inline MatX displacement_inputs(const std::vector<Vec3>& v,
                                const std::vector<Vec3>& vbar) {
  if (v.size() != vbar.size())
    throw std::invalid_argument("displacement: vertex count mismatch");
  MatX in(6, v.size());
  for (size_t i = 0; i < v.size(); i++) {
    in.col(i).head<3>() = v[i];
    in.col(i).tail<3>() = vbar[i];
  }
  return in;
}

inline std::vector<Vec3> displacement_eval(const DenseNet& f,
                                           const std::vector<Vec3>& v,
                                           const std::vector<Vec3>& vbar) {
  validate_displacement_net(f);
  NetEval ev = net_eval_grad_batch(f, displacement_inputs(v, vbar));
  std::vector<Vec3> dv(v.size());
  for (size_t i = 0; i < v.size(); i++) dv[i] = ev.output.col(i);
  return dv;
}

// Same, with gradients: dparams accumulates sum_i upstream_i . dv_i over
// phi, dv_pos the pullback onto the deformed positions (first input slice).
inline std::vector<Vec3> displacement_eval_grad(
    const DenseNet& f, const std::vector<Vec3>& v,
    const std::vector<Vec3>& vbar, const std::vector<Vec3>& upstream,
    VecX* dparams, std::vector<Vec3>* dv_pos = nullptr) {
  validate_displacement_net(f);
  if (upstream.size() != v.size())
    throw std::invalid_argument("displacement: upstream count mismatch");
  MatX up(3, v.size());
  for (size_t i = 0; i < v.size(); i++) up.col(i) = upstream[i];
  NetEval ev = net_eval_grad_batch(f, displacement_inputs(v, vbar), &up);
  if (dparams) *dparams = ev.dparams;
  if (dv_pos) {
    dv_pos->resize(v.size());
    for (size_t i = 0; i < v.size(); i++)
      (*dv_pos)[i] = ev.dinput.col(i).head<3>();
  }
  std::vector<Vec3> dv(v.size());
  for (size_t i = 0; i < v.size(); i++) dv[i] = ev.output.col(i);
  return dv;
}

// --- Serialization ---------------------------------------------------------
//
// Shape manifest as JSON next to a 1-row PFM holding the flat parameter
// vector. PFM is float32; reloads are deterministic, training checkpoints
// round-trip through the same quantization.

inline void save_dense_net(const DenseNet& net, const std::string& json_path,
                           const std::string& blob_path) {
  ChannelImage img = make_channel_image(ChannelTag::mask, 1,
                                        int(net.params.size()));
  for (int i = 0; i < net.params.size(); i++)
    img.at(0, i) = float(net.params[i]);
  write_pfm(blob_path, img);
  nlohmann::ordered_json j;
  j["widths"] = net.widths;
  j["activation"] = activation_name(net.act);
  j["time_embed"] = net.time_embed;
  j["params"] = std::filesystem::path(blob_path).filename().string();
  j["count"] = net.params.size();
  write_text_file(json_path, j.dump(2) + "\n");
}

inline DenseNet load_dense_net(const std::string& json_path) {
  nlohmann::ordered_json j =
      nlohmann::ordered_json::parse(read_text_file(json_path));
  DenseNet net;
  net.widths = j.at("widths").get<std::vector<int>>();
  net.act = activation_from_name(j.at("activation").get<std::string>());
  net.time_embed = j.at("time_embed").get<int>();
  std::string blob = (std::filesystem::path(json_path).parent_path() /
                      j.at("params").get<std::string>())
                         .string();
  ChannelImage img = read_pfm(blob, ChannelTag::mask);
  int n = dense_param_count(net.widths);
  if (img.height != 1 || img.width != n)
    throw std::runtime_error(
        str_format("%s: expected %d parameters, blob holds %dx%d",
                   json_path.c_str(), n, img.height, img.width));
  net.params = VecX(n);
  for (int i = 0; i < n; i++) net.params[i] = img.at(0, i);
  return net;
}

}  // namespace garm
