#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "xmodal/errors.hpp"

namespace xmodal {

using Vec = std::vector<double>;
using LogitVector = Vec;  // unnormalized class scores, length C
using ProbVector = Vec;   // point on the class simplex, length C

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct Layer {
  Matrix w;  // out x in
  Vec b;     // out
};

// Per-parameter gradients, shape-congruent with the owning network.
struct GradientSet {
  std::vector<Layer> layers;

  void set_zero();
  void scale(double s);
  void add(const GradientSet& other);
  bool all_finite() const;
};

// Small dense classifier: rectifier hidden layers, identity output layer.
// dims = input dim -> hidden dims -> class count.
class MlpNetwork {
 public:
  // Seeded init: weights and biases uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  MlpNetwork(std::vector<int> dims, std::uint64_t seed);

  static MlpNetwork zeros(std::vector<int> dims);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int num_classes() const { return dims_.back(); }
  std::size_t num_parameters() const;

  LogitVector forward(const Vec& input) const;

  // Forward pass that keeps per-layer pre-activations and activations so a
  // backward pass can reuse them. act[0] is the input, act[L] the logits.
  struct Trace {
    std::vector<Vec> pre;  // z_1 .. z_L
    std::vector<Vec> act;  // a_0 .. a_L
  };
  Trace forward_trace(const Vec& input) const;

  // Exact gradients of a scalar loss w.r.t. every parameter, given the loss
  // gradient w.r.t. the output logits.
  GradientSet backward(const Trace& trace, const Vec& loss_grad_wrt_logits) const;
  GradientSet backward(const Vec& input, const Vec& loss_grad_wrt_logits) const;
  // Accumulating variant used by the mini-batch loop.
  void backward_into(const Trace& trace, const Vec& loss_grad_wrt_logits, GradientSet& out) const;

  GradientSet zero_gradients() const;

  // p <- p - lr * g. Throws NumericError if the gradients are not finite.
  void sgd_step(const GradientSet& grads, double lr);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  bool all_finite() const;

 private:
  MlpNetwork() = default;
  void check_dims() const;

  std::vector<int> dims_;
  std::vector<Layer> layers_;
};

bool bitwise_equal(const MlpNetwork& a, const MlpNetwork& b);

// Softened softmax: P(c) = exp(z_c / tau) / sum_d exp(z_d / tau),
// stabilized by subtracting max(z) in logit space before the division by tau
// (this makes shift invariance exact for exactly-representable shifts).
ProbVector softened_softmax(const LogitVector& z, double tau);

// Stable log of the softened softmax (log-sum-exp form).
Vec log_softened_softmax(const LogitVector& z, double tau);

double shannon_entropy(const ProbVector& p);

// Argmax with ties broken toward the lowest index.
int argmax_lowest(const Vec& v);

bool is_prob_vector(const ProbVector& p, double tol = 1e-9);

// Compares analytic parameter gradients against central finite differences
// for an arbitrary scalar loss on the logits; returns the worst relative
// error over all parameters. Never mutates the network it is given.
double grad_check(const MlpNetwork& net, const Vec& input,
                  const std::function<double(const LogitVector&)>& loss_fn,
                  const std::function<Vec(const LogitVector&)>& loss_grad_fn,
                  double step = 1e-5);

}  // namespace xmodal
