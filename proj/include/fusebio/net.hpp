// Minimal trainable network: 1-D convolution, statistics pooling, dense
// layers, softmax/cross-entropy, SGD with momentum, and a finite-difference
// gradient check. Frame inputs are (time x channels) matrices.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fusebio/common.hpp"

namespace fusebio {

enum class LayerType : std::uint32_t {
  kConv1d = 0,
  kRelu = 1,
  kStatPool = 2,
  kDense = 3,
  kSoftmax = 4,
};

struct LayerSpec {
  LayerType type = LayerType::kRelu;
  // conv
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int dilation = 1;
  // dense
  int in = 0;
  int out = 0;

  static LayerSpec conv1d(int in_ch, int out_ch, int kernel, int dilation = 1);
  static LayerSpec relu();
  static LayerSpec stat_pool();
  static LayerSpec dense(int in, int out);
  static LayerSpec softmax();
};

// A value flowing through the network: frames (time x channels) or a vector.
using Signal = std::variant<Eigen::MatrixXd, Eigen::VectorXd>;

const Eigen::MatrixXd& as_matrix(const Signal& s);
const Eigen::VectorXd& as_vector(const Signal& s);

struct Network {
  std::vector<LayerSpec> layers;
  std::vector<Eigen::MatrixXd> weights;  // conv: out_ch x (in_ch*kernel); dense: out x in
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t seed = 0;

  std::size_t parameter_count() const;
  // Minimum number of input frames a conv stack needs to emit one frame.
  int receptive_field() const;
};

// Validates layer compatibility and applies He-uniform initialization
// driven by the seed (biases start at zero).
Network make_network(std::vector<LayerSpec> layers, std::uint64_t seed);

struct ActivationTrace {
  std::vector<Signal> activations;  // activations[0] = input, [i+1] = layer i output
  // Pre-softmax vector (the final activation when no softmax layer exists).
  const Eigen::VectorXd& logits() const;
  Eigen::Index logits_index = 0;
};

ActivationTrace forward(const Network& net, const Signal& input);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  double squared_norm() const;
  void scale(double s);
  void accumulate(const Gradients& other);
};

Gradients zero_gradients(const Network& net);

// Backpropagates from d(loss)/d(logits); a trailing softmax layer is part of
// the loss and is skipped.
Gradients backward(const Network& net, const ActivationTrace& trace,
                   const Eigen::VectorXd& logit_grad);

// First half per-channel means, second half population std with a 1e-8
// epsilon inside the square root.
Eigen::VectorXd stat_pool(const Eigen::MatrixXd& frames);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Log-sum-exp stabilized; grad = softmax(logits) - onehot(label).
LossAndGrad softmax_cross_entropy(const Eigen::VectorXd& logits, int label);

struct OptimizerState {
  std::vector<Eigen::MatrixXd> weight_velocity;
  std::vector<Eigen::VectorXd> bias_velocity;
};

OptimizerState make_optimizer_state(const Network& net);

// v <- momentum*v + g; p <- p - lr*v
void sgd_momentum_step(Network& net, const Gradients& grads, OptimizerState& state, double lr,
                       double momentum);

struct TrainConfig {
  int epochs = 8;
  int batch_size = 128;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double min_gradient_norm = 1e-6;
};

struct TrainSample {
  Signal input;
  int label = 0;
};

struct EpochStats {
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  bool stopped_early = false;
};

// Geometric interpolation lr_start -> lr_end over the epochs; epoch is
// zero-based.
double learning_rate_for_epoch(const TrainConfig& cfg, int epoch);

// Mini-batch SGD with per-epoch reshuffling driven by cfg.seed; stops when a
// mini-batch gradient norm drops below cfg.min_gradient_norm.
TrainResult train(Network& net, const std::vector<TrainSample>& dataset, const TrainConfig& cfg);

// Flat parameter access (weights then bias, layer by layer).
double get_parameter(const Network& net, std::size_t flat_index);
void set_parameter(Network& net, std::size_t flat_index, double value);
double get_gradient(const Gradients& grads, std::size_t flat_index);

// err_i = |a_i - n_i| / max(|a_i|, |n_i|, 1e-8), maximized over entries
double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

// Central-difference loss derivative at the given flat parameter indices.
std::vector<double> numeric_gradient(const Network& net, const Signal& input, int label,
                                     double eps, const std::vector<std::size_t>& indices);

// Random 1% parameter subsample (at least min_count, at most all).
std::vector<std::size_t> sample_parameter_indices(const Network& net, double fraction,
                                                  std::size_t min_count, Rng& rng);

// Max relative error between analytic and central-difference gradients over
// a random 1% parameter subsample (min 50 entries).
double gradient_check(const Network& net, const Signal& input, int label, double eps);

// Argmax over the final output, ties broken toward the lowest class index.
int predict_class(const Network& net, const Signal& input);

// magic "FBNN", u32 layer count, per-layer type tag + dims, f32 parameters
// in declaration order, little-endian
void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

// Single dense + softmax multinomial logistic model; the classifier shared
// by the fusion strategies and the gammatonegram branch.
struct SoftmaxClassifier {
  Eigen::MatrixXd weight;  // n_classes x input_dim
  Eigen::VectorXd bias;    // n_classes

  Eigen::Index input_dim() const { return weight.cols(); }
  Eigen::Index n_classes() const { return weight.rows(); }

  Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
  Eigen::VectorXd posterior(const Eigen::VectorXd& x) const;
  int predict(const Eigen::VectorXd& x) const;
};

SoftmaxClassifier train_softmax_classifier(const std::vector<Eigen::VectorXd>& inputs,
                                           const std::vector<int>& labels, int n_classes,
                                           const TrainConfig& cfg);

int argmax_lowest(const Eigen::VectorXd& v);

}  // namespace fusebio
