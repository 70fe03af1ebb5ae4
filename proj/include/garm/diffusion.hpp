#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "garm/net.hpp"

// DDPM engine: linear-beta schedule, epsilon-prediction training, ancestral
// and manifold-guided sampling. One engine backs the shape prior, the
// back-normal completion and the pixel-to-UV mapper; they differ only in
// their channel layouts.

namespace garm {

// --- Schedule ---------------------------------------------------------------

struct NoiseSchedule {
  int T = 0;
  double beta1 = 0, betaT = 0;
  // 1-indexed by timestep; [0] holds the abar_0 = 1 base case.
  std::vector<double> beta, alpha, abar, sigma;
};

// Desk-scale default: T=200 with the usual 1e-4..0.02 betas lands at
// abar_T ~ 0.13, noisy enough for ancestral starts from N(0, I).
inline NoiseSchedule make_schedule(int T = 200, double beta1 = 1e-4,
                                   double betaT = 0.02) {
  if (T < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta1 > 0 && beta1 < betaT && betaT < 1))
    throw std::invalid_argument(
        str_format("betas must satisfy 0 < %g < %g < 1", beta1, betaT));
  NoiseSchedule s;
  s.T = T;
  s.beta1 = beta1;
  s.betaT = betaT;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.abar.assign(T + 1, 1.0);
  s.sigma.assign(T + 1, 0.0);
  for (int t = 1; t <= T; t++) {
    double f = T == 1 ? 0.0 : double(t - 1) / double(T - 1);
    s.beta[t] = beta1 + f * (betaT - beta1);
    s.alpha[t] = 1.0 - s.beta[t];
    s.abar[t] = s.abar[t - 1] * s.alpha[t];
    // DDPM posterior std; abar_0 = 1 makes the t=1 step noiseless.
    s.sigma[t] =
        std::sqrt(s.beta[t] * (1.0 - s.abar[t - 1]) / (1.0 - s.abar[t]));
  }
  if (s.abar[T] >= 0.2)
    throw std::invalid_argument(
        str_format("schedule too weak: abar_T = %.4f >= 0.2", s.abar[T]));
  return s;
}

inline void check_timestep(const NoiseSchedule& s, int t) {
  if (t < 1 || t > s.T)
    throw std::domain_error(
        str_format("timestep %d outside [1, %d]", t, s.T));
}

inline VecX q_sample(const VecX& x0, int t, const VecX& eps,
                     const NoiseSchedule& s) {
  check_timestep(s, t);
  if (eps.size() != x0.size())
    throw std::invalid_argument("q_sample: noise shape mismatch");
  return std::sqrt(s.abar[t]) * x0 + std::sqrt(1.0 - s.abar[t]) * eps;
}

inline VecX predict_x0(const VecX& xt, int t, const VecX& eps_hat,
                       const NoiseSchedule& s) {
  check_timestep(s, t);
  if (eps_hat.size() != xt.size())
    throw std::invalid_argument("predict_x0: shape mismatch");
  double a = s.abar[t];
  return xt / std::sqrt(a) - std::sqrt((1.0 - a) / a) * eps_hat;
}

// Posterior mean of x_{t-1}; the ancestral step adds sigma_t noise on top.
inline VecX reverse_step_mean(const VecX& xt, int t, const VecX& eps_hat,
                              const NoiseSchedule& s) {
  check_timestep(s, t);
  return (xt - (s.beta[t] / std::sqrt(1.0 - s.abar[t])) * eps_hat) /
         std::sqrt(s.alpha[t]);
}

// --- Tasks ------------------------------------------------------------------

struct ChannelSpec {
  std::string name;
  int channels = 0;
};

inline int total_channels(const std::vector<ChannelSpec>& specs) {
  int n = 0;
  for (const auto& c : specs) n += c.channels;
  return n;
}

// What a denoiser works on: target image stack (the diffused variable) and
// an optional conditioning stack at pooled resolution.
struct DiffusionTask {
  std::string tag;
  int rows = 0, cols = 0;
  std::vector<ChannelSpec> target;
  int cond_rows = 0, cond_cols = 0;
  std::vector<ChannelSpec> condition;
  int time_embed = 16;
  // Span of the normalized data values, scales the guidance step.
  double value_range = 2.0;

  int target_channels() const { return total_channels(target); }
  int condition_channels() const { return total_channels(condition); }
  int target_size() const { return rows * cols * target_channels(); }
  int condition_size() const {
    return cond_rows * cond_cols * condition_channels();
  }
};

// Conditioning images enter the dense nets average-pooled by this factor;
// targets stay at full resolution.
constexpr int kConditionPool = 4;

inline DiffusionTask make_prior_task(int rows = 32, int cols = 64) {
  DiffusionTask t;
  t.tag = "prior";
  t.rows = rows;
  t.cols = cols;
  t.target = {{"uv_positions", 3}, {"panel_mask", 1}};
  return t;
}

inline DiffusionTask make_back_normal_task(int obs = 64) {
  DiffusionTask t;
  t.tag = "back_normal";
  t.rows = obs;
  t.cols = obs;
  t.target = {{"back_normal", 3}, {"foreground_mask", 1}};
  t.cond_rows = obs / kConditionPool;
  t.cond_cols = obs / kConditionPool;
  t.condition = {{"front_normal", 3},
                 {"front_seg", 1},
                 {"back_seg", 1},
                 {"front_depth_body", 1},
                 {"back_depth_body", 1}};
  return t;
}

inline DiffusionTask make_mapper_task(int obs = 64) {
  DiffusionTask t;
  t.tag = "mapper";
  t.rows = obs;
  t.cols = obs;
  t.target = {{"front_uv", 3},
              {"back_uv", 3},
              {"front_depth_garment", 1},
              {"back_depth_garment", 1}};
  t.cond_rows = obs / kConditionPool;
  t.cond_cols = obs / kConditionPool;
  t.condition = {{"front_normal", 3},  {"back_normal", 3},
                 {"front_seg", 1},     {"back_seg", 1},
                 {"front_depth_body", 1}, {"back_depth_body", 1}};
  return t;
}

// --- Model ------------------------------------------------------------------

struct DiffusionModel {
  DiffusionTask task;
  NoiseSchedule schedule;
  DenseNet net;
  std::vector<double> loss_curve;  // per-epoch training means
};

inline VecX net_input(const DiffusionModel& m, const VecX& xt,
                      const VecX* condition, int t) {
  const DiffusionTask& task = m.task;
  if (xt.size() != task.target_size())
    throw std::invalid_argument(
        str_format("%s: target size %d, got %d", task.tag.c_str(),
                   task.target_size(), int(xt.size())));
  bool want_cond = task.condition_size() > 0;
  if (want_cond && (!condition || condition->size() != task.condition_size()))
    throw std::invalid_argument(
        str_format("%s: condition of size %d required", task.tag.c_str(),
                   task.condition_size()));
  if (!want_cond && condition && condition->size() != 0)
    throw std::invalid_argument(task.tag + ": task takes no condition");
  VecX in(task.target_size() + task.condition_size() + task.time_embed);
  in.head(xt.size()) = xt;
  if (want_cond) in.segment(xt.size(), condition->size()) = *condition;
  if (task.time_embed > 0)
    in.tail(task.time_embed) = time_embedding(double(t), task.time_embed);
  return in;
}

inline VecX eps_predict(const DiffusionModel& m, const VecX& xt,
                        const VecX* condition, int t) {
  check_timestep(m.schedule, t);
  return net_forward(m.net, net_input(m, xt, condition, t));
}

// --- Training ---------------------------------------------------------------

struct TrainingSet {
  std::vector<VecX> targets;
  std::vector<VecX> conditions;  // empty for unconditioned tasks
  // Channel layouts of the stacks above, validated against the task so a
  // dataset assembled in the wrong order fails loudly instead of training.
  std::vector<ChannelSpec> target_layout, condition_layout;
};

struct TrainOptions {
  int epochs = 300;
  int batch = 16;
  double lr = 1e-3;
  std::vector<int> hidden = {256, 256};
  uint64_t seed = 1;
};

namespace detail {

inline void check_layout(const std::vector<ChannelSpec>& got,
                         const std::vector<ChannelSpec>& want,
                         const std::string& which) {
  if (got.empty()) return;  // raw numeric datasets skip the name check
  auto fmt = [](const std::vector<ChannelSpec>& v) {
    std::string s;
    for (const auto& c : v) s += c.name + "(" + std::to_string(c.channels) + ") ";
    return s;
  };
  bool ok = got.size() == want.size();
  for (size_t i = 0; ok && i < got.size(); i++)
    ok = got[i].name == want[i].name && got[i].channels == want[i].channels;
  if (!ok)
    throw std::invalid_argument(which + " layout mismatch: dataset has " +
                                fmt(got) + "but task wants " + fmt(want));
}

}  // namespace detail

inline DiffusionModel train_denoiser(const TrainingSet& data,
                                     const DiffusionTask& task,
                                     const NoiseSchedule& schedule,
                                     const TrainOptions& opt = {}) {
  if (data.targets.empty())
    throw std::invalid_argument("train_denoiser: empty dataset");
  detail::check_layout(data.target_layout, task.target, "target");
  detail::check_layout(data.condition_layout, task.condition, "condition");
  int n = task.target_size();
  for (const VecX& x : data.targets)
    if (x.size() != n)
      throw std::invalid_argument(
          str_format("train_denoiser: target size %d, want %d",
                     int(x.size()), n));
  bool cond = task.condition_size() > 0;
  if (cond && data.conditions.size() != data.targets.size())
    throw std::invalid_argument(
        "train_denoiser: one condition per target required");
  if (cond)
    for (const VecX& c : data.conditions)
      if (c.size() != task.condition_size())
        throw std::invalid_argument(
            str_format("train_denoiser: condition size %d, want %d",
                       int(c.size()), task.condition_size()));

  DiffusionModel m;
  m.task = task;
  m.schedule = schedule;
  Rng rng(opt.seed);
  std::vector<int> widths;
  widths.push_back(n + task.condition_size() + task.time_embed);
  for (int h : opt.hidden) widths.push_back(h);
  widths.push_back(n);
  m.net = make_dense_net(widths, rng, Activation::silu, task.time_embed);

  AdamState adam;
  adam.lr = opt.lr;
  int N = int(data.targets.size());
  int B = opt.batch;
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  int in_w = widths.front();
  for (int epoch = 0; epoch < opt.epochs; epoch++) {
    for (int i = N - 1; i > 0; i--)
      std::swap(order[i], order[rng.uniform_int(0, i)]);
    double epoch_loss = 0;
    int steps = 0;
    // Batches wrap around the permutation, so a dataset smaller than the
    // batch still gets a full batch of fresh (t, noise) draws per step.
    for (int start = 0; start < N; start += B) {
      int b = B;
      MatX in(in_w, b), eps(n, b);
      for (int k = 0; k < b; k++) {
        int idx = order[(start + k) % N];
        int t = rng.uniform_int(1, schedule.T);
        for (int j = 0; j < n; j++) eps(j, k) = rng.normal();
        VecX xt = q_sample(data.targets[idx], t, eps.col(k), schedule);
        in.col(k).head(n) = xt;
        if (cond)
          in.col(k).segment(n, task.condition_size()) = data.conditions[idx];
        if (task.time_embed > 0)
          in.col(k).tail(task.time_embed) =
              time_embedding(double(t), task.time_embed);
      }
      NetEval fw = net_eval_grad_batch(m.net, in);
      MatX diff = fw.output - eps;
      double loss = diff.squaredNorm() / double(n) / double(b);
      if (!std::isfinite(loss))
        throw std::runtime_error(
            str_format("train_denoiser: non-finite loss at epoch %d", epoch));
      MatX up = (2.0 / double(n) / double(b)) * diff;
      NetEval bw = net_eval_grad_batch(m.net, in, &up);
      adam_step(m.net.params, bw.dparams, adam);
      epoch_loss += loss;
      steps++;
    }
    m.loss_curve.push_back(epoch_loss / steps);
  }
  return m;
}

// --- Sampling ---------------------------------------------------------------

inline VecX reverse_step(const DiffusionModel& m, const VecX& xt, int t,
                         const VecX* condition, Rng& rng) {
  VecX eps_hat = eps_predict(m, xt, condition, t);
  VecX mean = reverse_step_mean(xt, t, eps_hat, m.schedule);
  if (t == 1) return mean;  // final step is noiseless
  for (int i = 0; i < mean.size(); i++)
    mean[i] += m.schedule.sigma[t] * rng.normal();
  return mean;
}

// Guidance evaluates a loss and its gradient at the current clean estimate.
using GuidanceFn = std::function<double(const VecX& x0_hat, VecX& grad)>;

struct SampleOptions {
  const VecX* condition = nullptr;
  // Differentiate the guidance through the denoiser as well as the
  // closed-form clean estimate. Off by default: the frozen approximation
  // is the usual practice and five times cheaper.
  bool backprop_through_net = false;
};

struct SampleResult {
  VecX x0;
  std::vector<int> trace_t;           // descending timesteps
  std::vector<double> trace_loss;     // guidance loss per step
};

inline SampleResult guided_sample(const DiffusionModel& m,
                                  const GuidanceFn& guidance, double rho,
                                  uint64_t seed, SampleOptions opt = {}) {
  const NoiseSchedule& s = m.schedule;
  int n = m.task.target_size();
  Rng rng(seed);
  VecX x(n);
  for (int i = 0; i < n; i++) x[i] = rng.normal();
  SampleResult res;
  for (int t = s.T; t >= 1; t--) {
    VecX net_in = net_input(m, x, opt.condition, t);
    VecX eps_hat = net_forward(m.net, net_in);
    VecX x0_hat = predict_x0(x, t, eps_hat, s);
    VecX g;
    double loss = 0;
    if (guidance) {
      loss = guidance(x0_hat, g);
      if (!std::isfinite(loss))
        throw std::runtime_error(
            str_format("guided_sample: non-finite guidance loss at t=%d", t));
      res.trace_t.push_back(t);
      res.trace_loss.push_back(loss);
    }
    VecX next = reverse_step_mean(x, t, eps_hat, s);
    if (t > 1)
      for (int i = 0; i < n; i++) next[i] += s.sigma[t] * rng.normal();
    if (guidance && rho > 0 && g.size() == n) {
      double a = s.abar[t];
      VecX gx;
      if (opt.backprop_through_net) {
        // x0_hat = x/sqrt(a) - sqrt((1-a)/a) eps_hat(x): pull g back
        // through both terms.
        VecX up = g;
        NetEval ev = net_eval_grad(m.net, net_in, &up);
        gx = g / std::sqrt(a) -
             std::sqrt((1.0 - a) / a) * ev.dinput.col(0).head(n);
      } else {
        gx = g / std::sqrt(a);
      }
      double gmax = gx.cwiseAbs().maxCoeff();
      if (gmax > 0) gx /= gmax;
      double rho_t = rho * std::sqrt(a) * m.task.value_range;
      next -= rho_t * gx;
    }
    x = next;
  }
  res.x0 = x;
  return res;
}

inline VecX ancestral_sample(const DiffusionModel& m, uint64_t seed,
                             const VecX* condition = nullptr) {
  SampleOptions opt;
  opt.condition = condition;
  return guided_sample(m, nullptr, 0.0, seed, opt).x0;
}

// Completion objective: L2 norm of the clean estimate's position error on
// observed cells plus L1 pull of its mask channel toward the known panel
// mask. All operands live in normalized target units; the target stacks
// its position block (3 interleaved channels) before the mask block.
//
// u_partial: observed positions (3*cells, zeros where unobserved),
// m_partial: per-cell observation weights, m_full: complete panel mask
// from the rest-shape fit.
inline GuidanceFn make_uv_guidance(const DiffusionTask& task,
                                   const VecX& u_partial,
                                   const VecX& m_partial, const VecX& m_full) {
  int cells = task.rows * task.cols;
  if (task.target_channels() != 4)
    throw std::invalid_argument("uv guidance expects a 4-channel target");
  if (u_partial.size() != 3 * cells || m_partial.size() != cells ||
      m_full.size() != cells)
    throw std::invalid_argument("uv guidance: observation size mismatch");
  int n = task.target_size();
  return [=](const VecX& x0_hat, VecX& grad) -> double {
    if (x0_hat.size() != n)
      throw std::invalid_argument("uv guidance: sample size mismatch");
    grad = VecX::Zero(n);
    double sq = 0;
    for (int p = 0; p < cells; p++) {
      double w = m_partial[p];
      if (w == 0) continue;
      for (int c = 0; c < 3; c++) {
        double d = w * (x0_hat[p * 3 + c] - u_partial[p * 3 + c]);
        sq += d * d;
      }
    }
    double l2 = std::sqrt(sq);
    if (l2 > 0)
      for (int p = 0; p < cells; p++) {
        double w = m_partial[p];
        if (w == 0) continue;
        for (int c = 0; c < 3; c++)
          grad[p * 3 + c] =
              w * w * (x0_hat[p * 3 + c] - u_partial[p * 3 + c]) / l2;
      }
    double l1 = 0;
    for (int p = 0; p < cells; p++) {
      double d = x0_hat[3 * cells + p] - m_full[p];
      l1 += std::abs(d);
      grad[3 * cells + p] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    }
    return l2 + l1;
  };
}

// --- Serialization ----------------------------------------------------------

inline nlohmann::ordered_json task_to_json(const DiffusionTask& t) {
  nlohmann::ordered_json j;
  j["tag"] = t.tag;
  j["rows"] = t.rows;
  j["cols"] = t.cols;
  auto specs = [](const std::vector<ChannelSpec>& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& c : v) a.push_back({{"name", c.name}, {"channels", c.channels}});
    return a;
  };
  j["target"] = specs(t.target);
  j["cond_rows"] = t.cond_rows;
  j["cond_cols"] = t.cond_cols;
  j["condition"] = specs(t.condition);
  j["time_embed"] = t.time_embed;
  j["value_range"] = t.value_range;
  return j;
}

inline DiffusionTask task_from_json(const nlohmann::ordered_json& j) {
  DiffusionTask t;
  t.tag = j.at("tag").get<std::string>();
  t.rows = j.at("rows").get<int>();
  t.cols = j.at("cols").get<int>();
  auto specs = [](const nlohmann::ordered_json& a) {
    std::vector<ChannelSpec> v;
    for (const auto& c : a)
      v.push_back({c.at("name").get<std::string>(), c.at("channels").get<int>()});
    return v;
  };
  t.target = specs(j.at("target"));
  t.cond_rows = j.at("cond_rows").get<int>();
  t.cond_cols = j.at("cond_cols").get<int>();
  t.condition = specs(j.at("condition"));
  t.time_embed = j.at("time_embed").get<int>();
  t.value_range = j.at("value_range").get<double>();
  return t;
}

inline void save_model(const DiffusionModel& m, const std::string& json_path,
                       const std::string& blob_path) {
  ChannelImage img =
      make_channel_image(ChannelTag::mask, 1, int(m.net.params.size()));
  for (int i = 0; i < m.net.params.size(); i++)
    img.at(0, i) = float(m.net.params[i]);
  write_pfm(blob_path, img);
  nlohmann::ordered_json j;
  j["task"] = task_to_json(m.task);
  j["schedule"] = {{"T", m.schedule.T},
                   {"beta1", m.schedule.beta1},
                   {"betaT", m.schedule.betaT}};
  j["net"] = {{"widths", m.net.widths},
              {"activation", activation_name(m.net.act)},
              {"params", std::filesystem::path(blob_path).filename().string()}};
  j["loss_curve"] = m.loss_curve;
  write_text_file(json_path, j.dump(2) + "\n");
}

inline DiffusionModel load_model(const std::string& json_path) {
  nlohmann::ordered_json j =
      nlohmann::ordered_json::parse(read_text_file(json_path));
  DiffusionModel m;
  m.task = task_from_json(j.at("task"));
  auto sj = j.at("schedule");
  m.schedule = make_schedule(sj.at("T").get<int>(), sj.at("beta1").get<double>(),
                             sj.at("betaT").get<double>());
  auto nj = j.at("net");
  m.net.widths = nj.at("widths").get<std::vector<int>>();
  m.net.act = activation_from_name(nj.at("activation").get<std::string>());
  m.net.time_embed = m.task.time_embed;
  std::string blob = (std::filesystem::path(json_path).parent_path() /
                      nj.at("params").get<std::string>())
                         .string();
  ChannelImage img = read_pfm(blob, ChannelTag::mask);
  int n = dense_param_count(m.net.widths);
  if (img.height != 1 || img.width != n)
    throw std::runtime_error(json_path + ": parameter blob size mismatch");
  m.net.params = VecX(n);
  for (int i = 0; i < n; i++) m.net.params[i] = img.at(0, i);
  if (j.contains("loss_curve"))
    m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  return m;
}

inline void write_trace_csv(const std::string& path, const SampleResult& r) {
  std::string out = "t,guidance_loss\n";
  for (size_t i = 0; i < r.trace_t.size(); i++)
    out += str_format("%d,%.9g\n", r.trace_t[i], r.trace_loss[i]);
  write_text_file(path, out);
}

}  // namespace garm
