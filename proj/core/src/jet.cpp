#include "sdpinn/jet.hpp"

#include <cmath>

#include <quadmath.h>

#include "sdpinn/errors.hpp"

namespace sdpinn {

namespace {

constexpr int kFullComponents = 5;

using quad = __float128;

// Scalar network evaluation in quad precision. Third differences at h = 1e-4
// divide by 2h^3 ~ 1e-12, which swamps double and long double rounding.
quad forward_quad(const ParameterVector& params, const Architecture& arch, quad x, quad t) {
  std::vector<quad> act = {(x - quad(arch.input.x_center)) * quad(arch.input.x_scale),
                           (t - quad(arch.input.t_center)) * quad(arch.input.t_scale)};
  std::vector<quad> next;
  for (int l = 0; l < arch.depth(); ++l) {
    const int n_in = arch.widths[l];
    const int n_out = arch.widths[l + 1];
    const double* w = params.data() + arch.weight_offset(l);
    const double* b = params.data() + arch.bias_offset(l);
    next.assign(n_out, quad(0));
    for (int o = 0; o < n_out; ++o) {
      quad z = quad(b[o]);
      for (int i = 0; i < n_in; ++i) z += quad(w[o * n_in + i]) * act[i];
      next[o] = (l + 1 < arch.depth()) ? tanhq(z) : z;
    }
    act.swap(next);
  }
  return act[0];
}

int component_count(JetOrder order) { return order == JetOrder::full ? kFullComponents : 1; }

}  // namespace

Jet JetBatch::at(Eigen::Index i) const {
  if (order == JetOrder::value) return Jet{u[i], 0.0, 0.0, 0.0, 0.0};
  return Jet{u[i], u_t[i], u_x[i], u_xx[i], u_xxx[i]};
}

JetBatch JetBatch::zeros_like(const JetBatch& like) {
  JetBatch z;
  z.order = like.order;
  const Eigen::Index n = like.size();
  z.u = Eigen::ArrayXd::Zero(n);
  if (like.order == JetOrder::full) {
    z.u_t = Eigen::ArrayXd::Zero(n);
    z.u_x = Eigen::ArrayXd::Zero(n);
    z.u_xx = Eigen::ArrayXd::Zero(n);
    z.u_xxx = Eigen::ArrayXd::Zero(n);
  }
  return z;
}

void JetBatch::set_zero() {
  u.setZero();
  u_t.setZero();
  u_x.setZero();
  u_xx.setZero();
  u_xxx.setZero();
}

NetworkTape::NetworkTape(Architecture arch) : arch_(std::move(arch)) {
  acts_.resize(arch_.depth() + 1);
  pre_.resize(arch_.depth());
}

const JetBatch& NetworkTape::forward(std::span<const double> params, std::span<const Point> points,
                                     JetOrder order) {
  check_parameter_count(arch_, params.size());
  params_ = params;
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  const int comps = component_count(order);
  n_points_ = n;
  components_ = comps;
  const Eigen::Index cols = n * comps;
  const InputScaling& in = arch_.input;

  Eigen::MatrixXd& a0 = acts_[0];
  a0.setZero(2, cols);
  for (Eigen::Index j = 0; j < n; ++j) {
    a0(0, j) = (points[j].x - in.x_center) * in.x_scale;
    a0(1, j) = (points[j].t - in.t_center) * in.t_scale;
  }
  if (order == JetOrder::full) {
    a0.row(0).segment(n, n).setConstant(in.x_scale);
    a0.row(1).segment(4 * n, n).setConstant(in.t_scale);
  }

  const int depth = arch_.depth();
  for (int l = 0; l < depth; ++l) {
    const int n_in = arch_.widths[l];
    const int n_out = arch_.widths[l + 1];
    Eigen::Map<const RowMatrix> w(params.data() + arch_.weight_offset(l), n_out, n_in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + arch_.bias_offset(l), n_out);
    const bool hidden = l + 1 < depth;
    Eigen::MatrixXd& z = hidden ? pre_[l] : acts_[l + 1];
    z.noalias() = w * acts_[l];
    z.leftCols(n).colwise() += b;
    if (!hidden) break;

    Eigen::MatrixXd& a = acts_[l + 1];
    a.resize(n_out, cols);
    // tanh(z) = 1 - 2 / (exp(2z) + 1) keeps the evaluation vectorized.
    a.leftCols(n).array() = 1.0 - 2.0 / ((2.0 * z.leftCols(n).array()).exp() + 1.0);
    if (order == JetOrder::full) {
      const Eigen::Index m = n * n_out;
      const double* zp = z.data();
      double* ap = a.data();
      for (Eigen::Index i = 0; i < m; ++i) {
        const double sv = ap[i];
        const double z1 = zp[m + i], z2 = zp[2 * m + i], z3 = zp[3 * m + i], zt = zp[4 * m + i];
        const double d1 = 1.0 - sv * sv;
        const double d2 = -2.0 * sv * d1;
        const double d3 = d1 * (4.0 * sv * sv - 2.0 * d1);
        ap[m + i] = d1 * z1;
        ap[2 * m + i] = d2 * z1 * z1 + d1 * z2;
        ap[3 * m + i] = d3 * z1 * z1 * z1 + 3.0 * d2 * z1 * z2 + d1 * z3;
        ap[4 * m + i] = d1 * zt;
      }
    }
  }

  const Eigen::MatrixXd& y = acts_[depth];
  out_.order = order;
  out_.u = y.row(0).segment(0, n).transpose().array();
  if (order == JetOrder::full) {
    out_.u_x = y.row(0).segment(n, n).transpose().array();
    out_.u_xx = y.row(0).segment(2 * n, n).transpose().array();
    out_.u_xxx = y.row(0).segment(3 * n, n).transpose().array();
    out_.u_t = y.row(0).segment(4 * n, n).transpose().array();
  } else {
    out_.u_x.resize(0);
    out_.u_xx.resize(0);
    out_.u_xxx.resize(0);
    out_.u_t.resize(0);
  }
  return out_;
}

void NetworkTape::backward(const JetBatch& adjoint, std::span<double> grad) {
  const Eigen::Index n = n_points_;
  const int comps = components_;
  if (adjoint.size() != n || (comps == kFullComponents) != (adjoint.order == JetOrder::full)) {
    throw ConfigError("adjoint batch does not match the last forward pass");
  }
  const Eigen::Index cols = n * comps;
  delta_.resize(1, cols);
  delta_.row(0).segment(0, n) = adjoint.u.matrix().transpose();
  if (comps == kFullComponents) {
    delta_.row(0).segment(n, n) = adjoint.u_x.matrix().transpose();
    delta_.row(0).segment(2 * n, n) = adjoint.u_xx.matrix().transpose();
    delta_.row(0).segment(3 * n, n) = adjoint.u_xxx.matrix().transpose();
    delta_.row(0).segment(4 * n, n) = adjoint.u_t.matrix().transpose();
  }

  for (int l = arch_.depth() - 1; l >= 0; --l) {
    const int n_in = arch_.widths[l];
    const int n_out = arch_.widths[l + 1];
    Eigen::Map<RowMatrix> gw(grad.data() + arch_.weight_offset(l), n_out, n_in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + arch_.bias_offset(l), n_out);
    gw.noalias() += delta_ * acts_[l].transpose();
    gb += delta_.leftCols(n).rowwise().sum();
    if (l == 0) break;

    Eigen::Map<const RowMatrix> w(params_.data() + arch_.weight_offset(l), n_out, n_in);
    delta_prev_.noalias() = w.transpose() * delta_;

    // Pull back through the tanh jet of layer l-1.
    const Eigen::Index m = n * n_in;
    const double* zp = pre_[l - 1].data();
    const double* sp = acts_[l].data();
    double* gp = delta_prev_.data();
    if (comps == kFullComponents) {
      for (Eigen::Index i = 0; i < m; ++i) {
        const double sv = sp[i];
        const double z1 = zp[m + i], z2 = zp[2 * m + i], z3 = zp[3 * m + i], zt = zp[4 * m + i];
        const double g0 = gp[i], g1 = gp[m + i], g2 = gp[2 * m + i], g3 = gp[3 * m + i],
                     gt = gp[4 * m + i];
        const double d1 = 1.0 - sv * sv;
        const double d2 = -2.0 * sv * d1;
        const double d3 = d1 * (4.0 * sv * sv - 2.0 * d1);
        const double d4 = -6.0 * d1 * d2 - 2.0 * sv * d3;
        const double z1sq = z1 * z1;
        gp[i] = g0 * d1 + g1 * d2 * z1 + gt * d2 * zt + g2 * (d3 * z1sq + d2 * z2) +
                g3 * (d4 * z1sq * z1 + 3.0 * d3 * z1 * z2 + d2 * z3);
        gp[m + i] = g1 * d1 + 2.0 * g2 * d2 * z1 + g3 * (3.0 * d3 * z1sq + 3.0 * d2 * z2);
        gp[2 * m + i] = g2 * d1 + 3.0 * g3 * d2 * z1;
        gp[3 * m + i] = g3 * d1;
        gp[4 * m + i] = gt * d1;
      }
    } else {
      for (Eigen::Index i = 0; i < m; ++i) gp[i] *= 1.0 - sp[i] * sp[i];
    }
    delta_.swap(delta_prev_);
  }
}

Jet jet_eval(const ParameterVector& params, const Architecture& arch, double x, double t) {
  if (!std::isfinite(x) || !std::isfinite(t)) throw DomainError("jet_eval: non-finite input");
  check_parameter_count(arch, static_cast<std::size_t>(params.size()));
  NetworkTape tape(arch);
  const Point p{x, t};
  const JetBatch& out =
      tape.forward(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())),
                   std::span<const Point>(&p, 1), JetOrder::full);
  return out.at(0);
}

Eigen::ArrayXd evaluate_values(const ParameterVector& params, const Architecture& arch,
                               std::span<const Point> points) {
  NetworkTape tape(arch);
  return tape
      .forward(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())),
               points, JetOrder::value)
      .u;
}

Jet fd_oracle(const ParameterVector& params, const Architecture& arch, double x, double t,
              double h) {
  if (!(h > 0.0)) throw ConfigError("fd_oracle: step must be positive");
  check_parameter_count(arch, static_cast<std::size_t>(params.size()));
  const quad hx = h;
  auto u = [&](quad dx, quad dt) { return forward_quad(params, arch, quad(x) + dx, quad(t) + dt); };
  const quad u0 = u(0, 0);
  const quad up = u(hx, 0), um = u(-hx, 0);
  const quad up2 = u(2 * hx, 0), um2 = u(-2 * hx, 0);
  const quad tp = u(0, hx), tm = u(0, -hx);
  Jet j;
  j.u = static_cast<double>(u0);
  j.u_t = static_cast<double>((tp - tm) / (2 * hx));
  j.u_x = static_cast<double>((up - um) / (2 * hx));
  j.u_xx = static_cast<double>((up - 2 * u0 + um) / (hx * hx));
  j.u_xxx = static_cast<double>((up2 - 2 * up + 2 * um - um2) / (2 * hx * hx * hx));
  return j;
}

ModelLayout::ModelLayout(std::vector<Architecture> networks, std::size_t aux_count)
    : networks_(std::move(networks)), aux_count_(aux_count) {
  offsets_.reserve(networks_.size() + 1);
  std::size_t off = 0;
  for (const auto& a : networks_) {
    offsets_.push_back(off);
    off += a.parameter_count();
  }
  offsets_.push_back(off);
}

GradientEvaluator::GradientEvaluator(ModelLayout layout, std::vector<BatchSpec> batches,
                                     const JetObjective& objective)
    : layout_(std::move(layout)), batches_(std::move(batches)), objective_(objective) {
  tapes_.reserve(batches_.size());
  for (const auto& b : batches_) {
    if (b.network >= layout_.network_count()) {
      throw ConfigError("batch refers to a network index outside the layout");
    }
    tapes_.emplace_back(layout_.network(b.network));
  }
  jets_.resize(batches_.size());
  adjoints_.resize(batches_.size());
}

double GradientEvaluator::loss(const ParameterVector& params, TermList* terms) {
  if (static_cast<std::size_t>(params.size()) != layout_.total_size()) {
    throw ConfigError("parameter length " + std::to_string(params.size()) +
                      " does not match model layout (" + std::to_string(layout_.total_size()) +
                      ")");
  }
  for (std::size_t i = 0; i < batches_.size(); ++i) {
    const std::size_t net = batches_[i].network;
    std::span<const double> p(params.data() + layout_.offset(net),
                              layout_.network(net).parameter_count());
    jets_[i] = tapes_[i].forward(p, batches_[i].points, batches_[i].order);
    if (adjoints_[i].size() != jets_[i].size() || adjoints_[i].order != jets_[i].order) {
      adjoints_[i] = JetBatch::zeros_like(jets_[i]);
    } else {
      adjoints_[i].set_zero();
    }
  }
  aux_scratch_.assign(layout_.aux_count(), 0.0);
  terms_.clear();
  std::span<const double> aux(params.data() + layout_.aux_offset(), layout_.aux_count());
  const double value = objective_.evaluate(jets_, aux, adjoints_, aux_scratch_, &terms_);
  if (!std::isfinite(value)) {
    for (const auto& [name, v] : terms_) {
      if (!std::isfinite(v)) throw NumericalFailure(name);
    }
    throw NumericalFailure("loss");
  }
  if (terms != nullptr) *terms = terms_;
  return value;
}

double GradientEvaluator::operator()(const ParameterVector& params, ParameterVector& grad) {
  const double value = loss(params);
  grad.setZero(static_cast<Eigen::Index>(layout_.total_size()));
  for (std::size_t i = 0; i < batches_.size(); ++i) {
    const std::size_t net = batches_[i].network;
    std::span<double> g(grad.data() + layout_.offset(net), layout_.network(net).parameter_count());
    tapes_[i].backward(adjoints_[i], g);
  }
  for (std::size_t k = 0; k < layout_.aux_count(); ++k) {
    grad[static_cast<Eigen::Index>(layout_.aux_offset() + k)] = aux_scratch_[k];
  }
  if (!grad.allFinite()) throw NumericalFailure("gradient");
  return value;
}

LossGradient GradientEvaluator::evaluate(const ParameterVector& params) {
  LossGradient out;
  out.loss = (*this)(params, out.gradient);
  return out;
}

LossGradient loss_gradient(const ModelLayout& layout, const ParameterVector& params,
                           std::vector<BatchSpec> batches, const JetObjective& objective) {
  GradientEvaluator eval(layout, std::move(batches), objective);
  return eval.evaluate(params);
}

}  // namespace sdpinn
