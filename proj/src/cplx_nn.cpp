#include "gridnet/cplx_nn.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace gridnet {

CVec crelu(const CVec& t) {
  CVec out(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i)
    out(i) = cxd{std::max(0.0, t(i).real()), std::max(0.0, t(i).imag())};
  return out;
}

CMat crelu(const CMat& t) {
  CMat out(t.rows(), t.cols());
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      out(r, c) = cxd{std::max(0.0, t(r, c).real()), std::max(0.0, t(r, c).imag())};
  return out;
}

namespace {

// Gate a packed gradient by the active set of the pre-activation.
cxd gate_one(cxd g, cxd pre) {
  return {pre.real() > 0.0 ? g.real() : 0.0, pre.imag() > 0.0 ? g.imag() : 0.0};
}

CMat crelu_gate(const CMat& grad, const CMat& pre) {
  CMat out(grad.rows(), grad.cols());
  for (Eigen::Index c = 0; c < grad.cols(); ++c)
    for (Eigen::Index r = 0; r < grad.rows(); ++r)
      out(r, c) = gate_one(grad(r, c), pre(r, c));
  return out;
}

CVec crelu_gate(const CVec& grad, const CVec& pre) {
  CVec out(grad.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    out(i) = gate_one(grad(i), pre(i));
  return out;
}

CMat glorot(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out,
            Rng& rng) {
  const double a = std::sqrt(3.0 / (fan_in + fan_out));
  CMat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      m(r, c) = cxd{rng.uniform(-a, a), rng.uniform(-a, a)};
  return m;
}

RMat glorot_real(Eigen::Index rows, Eigen::Index cols, double fan_in,
                 double fan_out, Rng& rng) {
  const double a = std::sqrt(3.0 / (fan_in + fan_out));
  RMat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-a, a);
  return m;
}

void validate_config(const StgcnConfig& cfg) {
  if (cfg.nodes < 1 || cfg.window < 1 || cfg.spatial_order < 0 ||
      cfg.temporal_channels < 1 || cfg.graph_channels < 1 ||
      cfg.hidden_widths.empty() || cfg.output_dim < 1)
    throw InvalidArgument("StgcnConfig: invalid architecture");
  for (int w : cfg.hidden_widths)
    if (w < 1) throw InvalidArgument("StgcnConfig: invalid hidden width");
}

// Polynomial graph layer pre-activation; optionally keeps the S^k X_bar
// terms for backprop.
CMat graph_conv_pre(const CMat& gso, const std::vector<CMat>& coeffs,
                    const CMat& xbar, std::vector<CMat>* pows_out) {
  if (coeffs.empty()) throw InvalidArgument("graph_conv: empty coefficient stack");
  if (gso.rows() != gso.cols() || gso.cols() != xbar.rows())
    throw InvalidArgument("graph_conv: dimension mismatch");
  for (const auto& c : coeffs)
    if (c.rows() != xbar.cols() || c.cols() != coeffs.front().cols())
      throw InvalidArgument("graph_conv: coefficient shape mismatch");

  CMat shifted = xbar;
  CMat pre = shifted * coeffs[0];
  if (pows_out) pows_out->push_back(shifted);
  for (size_t k = 1; k < coeffs.size(); ++k) {
    shifted = gso * shifted;
    pre += shifted * coeffs[k];
    if (pows_out) pows_out->push_back(shifted);
  }
  return pre;
}

}  // namespace

StgcnModel init_stgcn(const StgcnConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  Rng rng(seed);
  StgcnModel m;
  m.cfg = cfg;

  m.temporal_kernel =
      glorot(cfg.window, cfg.temporal_channels, cfg.window, cfg.temporal_channels, rng);
  m.temporal_bias = CVec::Zero(cfg.temporal_channels);

  const double graph_fan_in =
      static_cast<double>(cfg.temporal_channels) * (cfg.spatial_order + 1);
  for (int k = 0; k <= cfg.spatial_order; ++k)
    m.graph_coeffs.push_back(glorot(cfg.temporal_channels, cfg.graph_channels,
                                    graph_fan_in, cfg.graph_channels, rng));
  m.graph_bias = CVec::Zero(cfg.graph_channels);

  int prev = cfg.flat_dim();
  for (int w : cfg.hidden_widths) {
    m.dense_w.push_back(glorot(w, prev, prev, w, rng));
    m.dense_b.push_back(CVec::Zero(w));
    prev = w;
  }

  if (cfg.head == HeadKind::Regression) {
    m.head_w = glorot(cfg.output_dim, prev, prev, cfg.output_dim, rng);
    m.head_b = CVec::Zero(cfg.output_dim);
    m.head_w_re.resize(0, 0);
    m.head_b_re.resize(0);
  } else {
    m.head_w = CMat(0, 0);
    m.head_b = CVec(0);
    m.head_w_re = glorot_real(cfg.output_dim, 2 * prev, 2.0 * prev,
                              cfg.output_dim, rng);
    m.head_b_re = RVec::Zero(cfg.output_dim);
  }
  return m;
}

void GradientSet::setZero(const StgcnModel& like) {
  temporal_kernel = CMat::Zero(like.temporal_kernel.rows(), like.temporal_kernel.cols());
  temporal_bias = CVec::Zero(like.temporal_bias.size());
  graph_coeffs.clear();
  for (const auto& c : like.graph_coeffs)
    graph_coeffs.push_back(CMat::Zero(c.rows(), c.cols()));
  graph_bias = CVec::Zero(like.graph_bias.size());
  dense_w.clear();
  dense_b.clear();
  for (size_t l = 0; l < like.dense_w.size(); ++l) {
    dense_w.push_back(CMat::Zero(like.dense_w[l].rows(), like.dense_w[l].cols()));
    dense_b.push_back(CVec::Zero(like.dense_b[l].size()));
  }
  head_w = CMat::Zero(like.head_w.rows(), like.head_w.cols());
  head_b = CVec::Zero(like.head_b.size());
  head_w_re = RMat::Zero(like.head_w_re.rows(), like.head_w_re.cols());
  head_b_re = RVec::Zero(like.head_b_re.size());
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  temporal_kernel += other.temporal_kernel;
  temporal_bias += other.temporal_bias;
  for (size_t k = 0; k < graph_coeffs.size(); ++k)
    graph_coeffs[k] += other.graph_coeffs[k];
  graph_bias += other.graph_bias;
  for (size_t l = 0; l < dense_w.size(); ++l) {
    dense_w[l] += other.dense_w[l];
    dense_b[l] += other.dense_b[l];
  }
  head_w += other.head_w;
  head_b += other.head_b;
  head_w_re += other.head_w_re;
  head_b_re += other.head_b_re;
  return *this;
}

GradientSet& GradientSet::operator*=(double scale) {
  temporal_kernel *= scale;
  temporal_bias *= scale;
  for (auto& g : graph_coeffs) g *= scale;
  graph_bias *= scale;
  for (auto& g : dense_w) g *= scale;
  for (auto& g : dense_b) g *= scale;
  head_w *= scale;
  head_b *= scale;
  head_w_re *= scale;
  head_b_re *= scale;
  return *this;
}

CMat temporal_conv(const CMat& kernel, const CMat& x) {
  if (x.cols() != kernel.rows())
    throw InvalidArgument("temporal_conv: window width mismatch");
  return x * kernel;
}

CMat graph_conv(const CMat& gso, const std::vector<CMat>& coeffs,
                const CMat& xbar) {
  return crelu(graph_conv_pre(gso, coeffs, xbar, nullptr));
}

ForwardResult forward(const StgcnModel& model, const CMat& gso, const CMat& x) {
  const StgcnConfig& cfg = model.cfg;
  if (x.rows() != cfg.nodes || x.cols() != cfg.window)
    throw InvalidArgument("forward: input window shape mismatch");
  if (gso.rows() != cfg.nodes || gso.cols() != cfg.nodes)
    throw InvalidArgument("forward: GSO shape mismatch");

  ForwardResult out;
  ForwardCache& cache = out.cache;
  cache.stamp = cfg;
  cache.gso = gso;
  cache.x = x;

  cache.xbar = temporal_conv(model.temporal_kernel, x);
  cache.xbar.rowwise() += model.temporal_bias.transpose();

  cache.graph_pre = graph_conv_pre(gso, model.graph_coeffs, cache.xbar,
                                   &cache.shift_pows);
  cache.graph_pre.rowwise() += model.graph_bias.transpose();
  cache.graph_act = crelu(cache.graph_pre);

  cache.flat = Eigen::Map<const CVec>(cache.graph_act.data(),
                                      cache.graph_act.size());

  CVec act = cache.flat;
  for (size_t l = 0; l < model.dense_w.size(); ++l) {
    CVec pre = model.dense_w[l] * act + model.dense_b[l];
    cache.dense_pre.push_back(pre);
    act = crelu(pre);
    cache.dense_act.push_back(act);
  }

  if (cfg.head == HeadKind::Regression) {
    cache.head_pre = model.head_w * act + model.head_b;
    cache.y_reg = CVec(cfg.output_dim);
    for (int i = 0; i < cfg.output_dim; ++i)
      cache.y_reg(i) = cxd{std::tanh(cache.head_pre(i).real()),
                           std::tanh(cache.head_pre(i).imag())};
    if (!cache.y_reg.allFinite())
      throw NumericalFailure("forward: non-finite regression output");
    out.regression = cache.y_reg;
  } else {
    RVec stacked(2 * act.size());
    stacked << act.real(), act.imag();
    cache.head_pre_re = model.head_w_re * stacked + model.head_b_re;
    cache.y_cls = (1.0 / (1.0 + (-cache.head_pre_re.array()).exp())).matrix();
    if (!cache.y_cls.allFinite())
      throw NumericalFailure("forward: non-finite classification output");
    out.classification = cache.y_cls;
  }
  return out;
}

LossValue loss_forecast(const CVec& y, const CVec& target, const CVec& v_meas_a,
                        const CVec& i_meas_a, const CMat& S,
                        const std::vector<int>& observed, double mu2) {
  if (y.size() != target.size())
    throw InvalidArgument("loss_forecast: target length mismatch");
  if (mu2 < 0.0) throw InvalidArgument("loss_forecast: mu2 must be >= 0");

  LossValue out;
  const CVec r1 = y - target;
  out.value = r1.squaredNorm();
  out.grad = 2.0 * r1;

  if (mu2 > 0.0 && !observed.empty()) {
    if (S.rows() != y.size() || S.cols() != y.size())
      throw InvalidArgument("loss_forecast: GSO shape mismatch");
    if (v_meas_a.size() != static_cast<Eigen::Index>(observed.size()) ||
        i_meas_a.size() != v_meas_a.size())
      throw InvalidArgument("loss_forecast: measured pair length mismatch");

    const CVec m = S * y;
    const CVec q = y.array() * m.array().conjugate();
    CVec r2(observed.size());
    for (size_t a = 0; a < observed.size(); ++a)
      r2(a) = v_meas_a(a) * std::conj(i_meas_a(a)) - q(observed[a]);
    out.value += mu2 * r2.squaredNorm();

    CVec gq = CVec::Zero(y.size());
    for (size_t a = 0; a < observed.size(); ++a)
      gq(observed[a]) = -2.0 * mu2 * r2(a);
    out.grad += (m.array() * gq.array()).matrix();
    out.grad += S.adjoint() * (y.array() * gq.array().conjugate()).matrix();
  }
  return out;
}

LossValueReal loss_localization(const RVec& y, const RVec& labels) {
  if (y.size() != labels.size())
    throw InvalidArgument("loss_localization: length mismatch");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels(i) != 0.0 && labels(i) != 1.0)
      throw InvalidArgument("loss_localization: labels must be binary");
  LossValueReal out;
  const RVec r = y - labels;
  out.value = r.squaredNorm();
  out.grad = 2.0 * r;
  return out;
}

namespace {

void check_cache(const StgcnModel& model, const ForwardCache& cache) {
  if (!(cache.stamp == model.cfg))
    throw InvalidArgument("backward: cache does not match this model");
}

// Shared path below the head: dense stack, graph layer, temporal layer.
void backward_core(const StgcnModel& model, const ForwardCache& cache,
                   CVec grad_hidden, GradientSet& g) {
  for (int l = static_cast<int>(model.dense_w.size()) - 1; l >= 0; --l) {
    const CVec gpre = crelu_gate(grad_hidden, cache.dense_pre[l]);
    const CVec& below = (l == 0) ? cache.flat : cache.dense_act[l - 1];
    g.dense_w[l] = gpre * below.adjoint();
    g.dense_b[l] = gpre;
    grad_hidden = model.dense_w[l].adjoint() * gpre;
  }

  const Eigen::Map<const CMat> grad_act(grad_hidden.data(),
                                        cache.graph_act.rows(),
                                        cache.graph_act.cols());
  const CMat gpre = crelu_gate(CMat(grad_act), cache.graph_pre);
  g.graph_bias = gpre.colwise().sum().transpose();
  for (size_t k = 0; k < model.graph_coeffs.size(); ++k)
    g.graph_coeffs[k] = cache.shift_pows[k].adjoint() * gpre;

  const size_t order = model.graph_coeffs.size() - 1;
  CMat grad_xbar = gpre * model.graph_coeffs[order].adjoint();
  for (size_t k = order; k-- > 0;)
    grad_xbar = cache.gso.adjoint() * grad_xbar +
                gpre * model.graph_coeffs[k].adjoint();

  g.temporal_kernel = cache.x.adjoint() * grad_xbar;
  g.temporal_bias = grad_xbar.colwise().sum().transpose();
}

}  // namespace

GradientSet backward(const StgcnModel& model, const ForwardCache& cache,
                     const CVec& grad_output) {
  check_cache(model, cache);
  if (model.cfg.head != HeadKind::Regression)
    throw InvalidArgument("backward: complex gradient needs a regression head");
  if (grad_output.size() != model.cfg.output_dim)
    throw InvalidArgument("backward: gradient length mismatch");

  GradientSet g;
  g.setZero(model);

  CVec gu(grad_output.size());
  for (Eigen::Index i = 0; i < grad_output.size(); ++i) {
    const double tr = cache.y_reg(i).real();
    const double ti = cache.y_reg(i).imag();
    gu(i) = cxd{grad_output(i).real() * (1.0 - tr * tr),
                grad_output(i).imag() * (1.0 - ti * ti)};
  }
  const CVec& last = cache.dense_act.back();
  g.head_w = gu * last.adjoint();
  g.head_b = gu;
  backward_core(model, cache, CVec(model.head_w.adjoint() * gu), g);
  return g;
}

GradientSet backward(const StgcnModel& model, const ForwardCache& cache,
                     const RVec& grad_output) {
  check_cache(model, cache);
  if (model.cfg.head != HeadKind::Classification)
    throw InvalidArgument("backward: real gradient needs a classification head");
  if (grad_output.size() != model.cfg.output_dim)
    throw InvalidArgument("backward: gradient length mismatch");

  GradientSet g;
  g.setZero(model);

  const RVec du =
      (grad_output.array() * cache.y_cls.array() * (1.0 - cache.y_cls.array()))
          .matrix();
  const CVec& last = cache.dense_act.back();
  RVec stacked(2 * last.size());
  stacked << last.real(), last.imag();
  g.head_w_re = du * stacked.transpose();
  g.head_b_re = du;

  const RVec gs = model.head_w_re.transpose() * du;
  CVec grad_hidden(last.size());
  for (Eigen::Index i = 0; i < last.size(); ++i)
    grad_hidden(i) = cxd{gs(i), gs(last.size() + i)};
  backward_core(model, cache, grad_hidden, g);
  return g;
}

namespace {

struct AdamState {
  GradientSet m;  // first moments (packed per plane)
  GradientSet v;  // second moments per plane
  long step = 0;

  void init(const StgcnModel& like) {
    m.setZero(like);
    v.setZero(like);
    step = 0;
  }
};

void adam_plane(double& p, double g, double& m, double& v,
                const TrainOptions& o, double bc1, double bc2) {
  m = o.beta1 * m + (1.0 - o.beta1) * g;
  v = o.beta2 * v + (1.0 - o.beta2) * g * g;
  p -= o.lr * (m / bc1) / (std::sqrt(v / bc2) + o.adam_eps);
}

void adam_update_c(cxd* p, const cxd* g, cxd* m, cxd* v, Eigen::Index n,
                   const TrainOptions& o, double bc1, double bc2) {
  for (Eigen::Index i = 0; i < n; ++i) {
    double pr = p[i].real(), pi = p[i].imag();
    double mr = m[i].real(), mi = m[i].imag();
    double vr = v[i].real(), vi = v[i].imag();
    adam_plane(pr, g[i].real(), mr, vr, o, bc1, bc2);
    adam_plane(pi, g[i].imag(), mi, vi, o, bc1, bc2);
    p[i] = {pr, pi};
    m[i] = {mr, mi};
    v[i] = {vr, vi};
  }
}

void adam_update_r(double* p, const double* g, double* m, double* v,
                   Eigen::Index n, const TrainOptions& o, double bc1,
                   double bc2) {
  for (Eigen::Index i = 0; i < n; ++i) adam_plane(p[i], g[i], m[i], v[i], o, bc1, bc2);
}

void adam_step(StgcnModel& model, const GradientSet& g, AdamState& st,
               const TrainOptions& o) {
  ++st.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.step));

  auto upd = [&](auto& param, const auto& grad, auto& m, auto& v) {
    adam_update_c(param.data(), grad.data(), m.data(), v.data(), param.size(),
                  o, bc1, bc2);
  };
  upd(model.temporal_kernel, g.temporal_kernel, st.m.temporal_kernel,
      st.v.temporal_kernel);
  upd(model.temporal_bias, g.temporal_bias, st.m.temporal_bias,
      st.v.temporal_bias);
  for (size_t k = 0; k < model.graph_coeffs.size(); ++k)
    upd(model.graph_coeffs[k], g.graph_coeffs[k], st.m.graph_coeffs[k],
        st.v.graph_coeffs[k]);
  upd(model.graph_bias, g.graph_bias, st.m.graph_bias, st.v.graph_bias);
  for (size_t l = 0; l < model.dense_w.size(); ++l) {
    upd(model.dense_w[l], g.dense_w[l], st.m.dense_w[l], st.v.dense_w[l]);
    upd(model.dense_b[l], g.dense_b[l], st.m.dense_b[l], st.v.dense_b[l]);
  }
  if (model.head_w.size() > 0) {
    upd(model.head_w, g.head_w, st.m.head_w, st.v.head_w);
    upd(model.head_b, g.head_b, st.m.head_b, st.v.head_b);
  }
  if (model.head_w_re.size() > 0) {
    adam_update_r(model.head_w_re.data(), g.head_w_re.data(),
                  st.m.head_w_re.data(), st.v.head_w_re.data(),
                  model.head_w_re.size(), o, bc1, bc2);
    adam_update_r(model.head_b_re.data(), g.head_b_re.data(),
                  st.m.head_b_re.data(), st.v.head_b_re.data(),
                  model.head_b_re.size(), o, bc1, bc2);
  }
}

}  // namespace

LossValue sample_loss_regression(const StgcnModel& model, const ForwardResult& fwd,
                                 const TrainSample& sample,
                                 const TrainOptions& opt) {
  (void)model;
  CVec y_phys = fwd.regression;
  y_phys.array() += opt.output_offset;
  // The offset has unit Jacobian, so the returned gradient is also the
  // gradient with respect to the raw head output.
  return loss_forecast(y_phys, sample.target, sample.v_meas, sample.i_meas,
                       opt.physics_gso, opt.observed, opt.mu2);
}

double average_loss(const StgcnModel& model, const CMat& gso,
                    const std::vector<TrainSample>& set, const TrainOptions& opt) {
  if (set.empty()) return 0.0;
  double total = 0.0;
  for (const auto& sample : set) {
    const ForwardResult fwd = forward(model, gso, sample.input);
    if (model.cfg.head == HeadKind::Regression)
      total += sample_loss_regression(model, fwd, sample, opt).value;
    else
      total += loss_localization(fwd.classification, sample.labels).value;
  }
  return total / static_cast<double>(set.size());
}

TrainResult train(const StgcnModel& init, const CMat& gso,
                  const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& val_set,
                  const TrainOptions& opt) {
  if (train_set.empty()) throw InvalidArgument("train: empty training set");
  if (opt.epochs < 0 || opt.batch < 1)
    throw InvalidArgument("train: bad epochs/batch");

  StgcnModel model = init;
  AdamState adam;
  adam.init(model);
  Rng rng(opt.seed);

  TrainResult result;
  result.model = model;
  double best_val = std::numeric_limits<double>::infinity();

  const int n = static_cast<int>(train_set.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    if (opt.shuffle)
      for (int i = n - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(i + 1)]);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += opt.batch) {
      const int stop = std::min(n, start + opt.batch);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      std::sort(batch.begin(), batch.end());  // fixed accumulation order

      GradientSet acc;
      acc.setZero(model);
      for (int idx : batch) {
        const TrainSample& sample = train_set[idx];
        const ForwardResult fwd = forward(model, gso, sample.input);
        if (model.cfg.head == HeadKind::Regression) {
          const LossValue loss = sample_loss_regression(model, fwd, sample, opt);
          epoch_loss += loss.value;
          acc += backward(model, fwd.cache, loss.grad);
        } else {
          const LossValueReal loss =
              loss_localization(fwd.classification, sample.labels);
          epoch_loss += loss.value;
          acc += backward(model, fwd.cache, loss.grad);
        }
      }
      acc *= 1.0 / static_cast<double>(batch.size());
      adam_step(model, acc, adam, opt);
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw TrainingDivergence("train: non-finite loss at epoch " +
                               std::to_string(epoch));
    result.train_loss.push_back(epoch_loss);

    const double val = val_set.empty()
                           ? epoch_loss
                           : average_loss(model, gso, val_set, opt);
    result.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch < 0) result.model = model;  // epochs == 0
  return result;
}

}  // namespace gridnet
