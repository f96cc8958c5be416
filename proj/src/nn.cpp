#include "xmodal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmodal/rng.hpp"

namespace xmodal {

namespace {

bool vec_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void GradientSet::set_zero() {
  for (auto& layer : layers) {
    std::fill(layer.w.data.begin(), layer.w.data.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
}

void GradientSet::scale(double s) {
  for (auto& layer : layers) {
    for (double& x : layer.w.data) x *= s;
    for (double& x : layer.b) x *= s;
  }
}

void GradientSet::add(const GradientSet& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("GradientSet::add: layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& dst = layers[i];
    const auto& src = other.layers[i];
    if (src.w.data.size() != dst.w.data.size() || src.b.size() != dst.b.size())
      throw ShapeError("GradientSet::add: shape mismatch");
    for (std::size_t j = 0; j < dst.w.data.size(); ++j) dst.w.data[j] += src.w.data[j];
    for (std::size_t j = 0; j < dst.b.size(); ++j) dst.b[j] += src.b[j];
  }
}

bool GradientSet::all_finite() const {
  for (const auto& layer : layers) {
    if (!vec_finite(layer.w.data) || !vec_finite(layer.b)) return false;
  }
  return true;
}

void MlpNetwork::check_dims() const {
  if (dims_.size() < 2) throw ConfigError("MlpNetwork: need at least input and output dims");
  for (int d : dims_) {
    if (d <= 0) throw ConfigError("MlpNetwork: layer dims must be positive");
  }
  if (dims_.back() < 2) throw ConfigError("MlpNetwork: class count must be >= 2");
}

MlpNetwork::MlpNetwork(std::vector<int> dims, std::uint64_t seed) {
  dims_ = std::move(dims);
  check_dims();
  Rng rng(seed);
  layers_.resize(dims_.size() - 1);
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    const int fan_in = dims_[i];
    const int fan_out = dims_[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layers_[i].w = Matrix(fan_out, fan_in);
    layers_[i].b.assign(fan_out, 0.0);
    for (double& x : layers_[i].w.data) x = rng.uniform(-bound, bound);
    for (double& x : layers_[i].b) x = rng.uniform(-bound, bound);
  }
}

MlpNetwork MlpNetwork::zeros(std::vector<int> dims) {
  MlpNetwork net;
  net.dims_ = std::move(dims);
  net.check_dims();
  net.layers_.resize(net.dims_.size() - 1);
  for (std::size_t i = 0; i + 1 < net.dims_.size(); ++i) {
    net.layers_[i].w = Matrix(net.dims_[i + 1], net.dims_[i]);
    net.layers_[i].b.assign(net.dims_[i + 1], 0.0);
  }
  return net;
}

std::size_t MlpNetwork::num_parameters() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.w.data.size() + layer.b.size();
  return n;
}

LogitVector MlpNetwork::forward(const Vec& input) const {
  if (static_cast<int>(input.size()) != dims_.front())
    throw ShapeError("forward: input length " + std::to_string(input.size()) +
                     " != input dim " + std::to_string(dims_.front()));
  Vec cur = input;
  Vec next;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    next.assign(layer.b.begin(), layer.b.end());
    for (int r = 0; r < layer.w.rows; ++r) {
      const double* wr = &layer.w.data[static_cast<std::size_t>(r) * layer.w.cols];
      double acc = 0.0;
      for (int c = 0; c < layer.w.cols; ++c) acc += wr[c] * cur[c];
      next[r] += acc;
    }
    if (i + 1 < layers_.size()) {
      for (double& x : next) x = x > 0.0 ? x : 0.0;
    }
    cur.swap(next);
  }
  return cur;
}

MlpNetwork::Trace MlpNetwork::forward_trace(const Vec& input) const {
  if (static_cast<int>(input.size()) != dims_.front())
    throw ShapeError("forward_trace: input length mismatch");
  Trace t;
  t.act.reserve(layers_.size() + 1);
  t.pre.reserve(layers_.size());
  t.act.push_back(input);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    const Vec& a = t.act.back();
    Vec z(layer.b);
    for (int r = 0; r < layer.w.rows; ++r) {
      const double* wr = &layer.w.data[static_cast<std::size_t>(r) * layer.w.cols];
      double acc = 0.0;
      for (int c = 0; c < layer.w.cols; ++c) acc += wr[c] * a[c];
      z[r] += acc;
    }
    t.pre.push_back(z);
    if (i + 1 < layers_.size()) {
      for (double& x : z) x = x > 0.0 ? x : 0.0;
    }
    t.act.push_back(std::move(z));
  }
  return t;
}

void MlpNetwork::backward_into(const Trace& trace, const Vec& loss_grad_wrt_logits,
                               GradientSet& out) const {
  if (static_cast<int>(loss_grad_wrt_logits.size()) != dims_.back())
    throw ShapeError("backward: upstream gradient length != class count");
  if (out.layers.size() != layers_.size()) throw ShapeError("backward: gradient set shape mismatch");

  Vec delta = loss_grad_wrt_logits;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const auto& layer = layers_[i];
    auto& grad = out.layers[i];
    const Vec& a_in = trace.act[i];
    for (int r = 0; r < layer.w.rows; ++r) {
      double* gr = &grad.w.data[static_cast<std::size_t>(r) * layer.w.cols];
      const double d = delta[r];
      for (int c = 0; c < layer.w.cols; ++c) gr[c] += d * a_in[c];
      grad.b[r] += d;
    }
    if (i > 0) {
      Vec prev(layer.w.cols, 0.0);
      for (int r = 0; r < layer.w.rows; ++r) {
        const double* wr = &layer.w.data[static_cast<std::size_t>(r) * layer.w.cols];
        const double d = delta[r];
        for (int c = 0; c < layer.w.cols; ++c) prev[c] += wr[c] * d;
      }
      const Vec& z = trace.pre[i - 1];
      for (int c = 0; c < layer.w.cols; ++c) {
        if (z[c] <= 0.0) prev[c] = 0.0;  // rectifier gate
      }
      delta.swap(prev);
    }
  }
}

GradientSet MlpNetwork::backward(const Trace& trace, const Vec& loss_grad_wrt_logits) const {
  GradientSet g = zero_gradients();
  backward_into(trace, loss_grad_wrt_logits, g);
  return g;
}

GradientSet MlpNetwork::backward(const Vec& input, const Vec& loss_grad_wrt_logits) const {
  return backward(forward_trace(input), loss_grad_wrt_logits);
}

GradientSet MlpNetwork::zero_gradients() const {
  GradientSet g;
  g.layers.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    g.layers[i].w = Matrix(layers_[i].w.rows, layers_[i].w.cols);
    g.layers[i].b.assign(layers_[i].b.size(), 0.0);
  }
  return g;
}

void MlpNetwork::sgd_step(const GradientSet& grads, double lr) {
  if (!(lr > 0.0)) throw DomainError("sgd_step: learning rate must be positive");
  if (grads.layers.size() != layers_.size()) throw ShapeError("sgd_step: gradient shape mismatch");
  if (!grads.all_finite())
    throw NumericError("sgd_step: non-finite gradient, aborting training");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& layer = layers_[i];
    const auto& g = grads.layers[i];
    if (g.w.data.size() != layer.w.data.size() || g.b.size() != layer.b.size())
      throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(i));
    for (std::size_t j = 0; j < layer.w.data.size(); ++j) layer.w.data[j] -= lr * g.w.data[j];
    for (std::size_t j = 0; j < layer.b.size(); ++j) layer.b[j] -= lr * g.b[j];
  }
  if (!all_finite()) throw NumericError("sgd_step: parameters became non-finite");
}

bool MlpNetwork::all_finite() const {
  for (const auto& layer : layers_) {
    if (!vec_finite(layer.w.data) || !vec_finite(layer.b)) return false;
  }
  return true;
}

bool bitwise_equal(const MlpNetwork& a, const MlpNetwork& b) {
  if (a.layer_dims() != b.layer_dims()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    if (a.layers()[i].w.data != b.layers()[i].w.data) return false;
    if (a.layers()[i].b != b.layers()[i].b) return false;
  }
  return true;
}

ProbVector softened_softmax(const LogitVector& z, double tau) {
  if (!(tau > 0.0)) throw DomainError("softened_softmax: tau must be positive");
  if (z.empty()) throw ShapeError("softened_softmax: empty logits");
  if (!vec_finite(z)) throw DomainError("softened_softmax: non-finite logits");
  // Max is subtracted in logit space, so shifting all logits by a constant
  // that keeps them exactly representable leaves the output bit-identical.
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  ProbVector p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp((z[i] - m) / tau);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

Vec log_softened_softmax(const LogitVector& z, double tau) {
  if (!(tau > 0.0)) throw DomainError("log_softened_softmax: tau must be positive");
  if (z.empty()) throw ShapeError("log_softened_softmax: empty logits");
  if (!vec_finite(z)) throw DomainError("log_softened_softmax: non-finite logits");
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  double sum = 0.0;
  for (double x : z) sum += std::exp((x - m) / tau);
  const double lse = std::log(sum);
  Vec out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - m) / tau - lse;
  return out;
}

double shannon_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

int argmax_lowest(const Vec& v) {
  if (v.empty()) throw ShapeError("argmax_lowest: empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

bool is_prob_vector(const ProbVector& p, double tol) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= tol;
}

double grad_check(const MlpNetwork& net, const Vec& input,
                  const std::function<double(const LogitVector&)>& loss_fn,
                  const std::function<Vec(const LogitVector&)>& loss_grad_fn, double step) {
  const GradientSet analytic = net.backward(input, loss_grad_fn(net.forward(input)));

  MlpNetwork probe = net;
  double worst = 0.0;
  for (std::size_t li = 0; li < probe.layers().size(); ++li) {
    auto eval_param = [&](double& p, double analytic_g) {
      const double saved = p;
      p = saved + step;
      const double lp = loss_fn(probe.forward(input));
      p = saved - step;
      const double lm = loss_fn(probe.forward(input));
      p = saved;
      const double fd = (lp - lm) / (2.0 * step);
      const double denom = std::max({std::abs(analytic_g), std::abs(fd), 1e-4});
      worst = std::max(worst, std::abs(analytic_g - fd) / denom);
    };
    auto& layer = probe.layers()[li];
    for (std::size_t j = 0; j < layer.w.data.size(); ++j)
      eval_param(layer.w.data[j], analytic.layers[li].w.data[j]);
    for (std::size_t j = 0; j < layer.b.size(); ++j)
      eval_param(layer.b[j], analytic.layers[li].b[j]);
  }
  return worst;
}

}  // namespace xmodal
