#include "fusebio/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace fusebio {

namespace {

constexpr double kStatPoolEps = 1e-8;

bool has_params(const LayerSpec& l) {
  return l.type == LayerType::kConv1d || l.type == LayerType::kDense;
}

// Shape bookkeeping while walking the layer list.
struct SignalShape {
  bool is_matrix = false;
  int channels = 0;  // matrix channels or vector length
};

SignalShape input_shape(const LayerSpec& first) {
  switch (first.type) {
    case LayerType::kConv1d:
      return {true, first.in_ch};
    case LayerType::kDense:
      return {false, first.in};
    default:
      throw InvalidSpec("network must start with a conv or dense layer");
  }
}

SignalShape advance_shape(const SignalShape& s, const LayerSpec& l) {
  switch (l.type) {
    case LayerType::kConv1d:
      if (!s.is_matrix || s.channels != l.in_ch) {
        throw InvalidSpec("conv input channels mismatch");
      }
      if (l.out_ch < 1 || l.kernel < 1 || l.dilation < 1) throw InvalidSpec("bad conv dims");
      return {true, l.out_ch};
    case LayerType::kRelu:
      return s;
    case LayerType::kStatPool:
      if (!s.is_matrix) throw InvalidSpec("stat pool needs frame input");
      return {false, 2 * s.channels};
    case LayerType::kDense:
      if (s.is_matrix || s.channels != l.in) throw InvalidSpec("dense input dim mismatch");
      if (l.out < 1) throw InvalidSpec("bad dense dims");
      return {false, l.out};
    case LayerType::kSoftmax:
      if (s.is_matrix) throw InvalidSpec("softmax needs vector input");
      return s;
  }
  throw InvalidSpec("unknown layer type");
}

}  // namespace

LayerSpec LayerSpec::conv1d(int in_ch, int out_ch, int kernel, int dilation) {
  LayerSpec l;
  l.type = LayerType::kConv1d;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = kernel;
  l.dilation = dilation;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.type = LayerType::kRelu;
  return l;
}

LayerSpec LayerSpec::stat_pool() {
  LayerSpec l;
  l.type = LayerType::kStatPool;
  return l;
}

LayerSpec LayerSpec::dense(int in, int out) {
  LayerSpec l;
  l.type = LayerType::kDense;
  l.in = in;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.type = LayerType::kSoftmax;
  return l;
}

const Eigen::MatrixXd& as_matrix(const Signal& s) {
  if (!std::holds_alternative<Eigen::MatrixXd>(s)) throw ShapeMismatch("expected frame input");
  return std::get<Eigen::MatrixXd>(s);
}

const Eigen::VectorXd& as_vector(const Signal& s) {
  if (!std::holds_alternative<Eigen::VectorXd>(s)) throw ShapeMismatch("expected vector input");
  return std::get<Eigen::VectorXd>(s);
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    n += static_cast<std::size_t>(weights[i].size()) + static_cast<std::size_t>(biases[i].size());
  }
  return n;
}

int Network::receptive_field() const {
  int field = 1;
  for (const LayerSpec& l : layers) {
    if (l.type == LayerType::kConv1d) field += (l.kernel - 1) * l.dilation;
  }
  return field;
}

Network make_network(std::vector<LayerSpec> layers, std::uint64_t seed) {
  if (layers.empty()) throw InvalidSpec("empty layer list");
  SignalShape shape = input_shape(layers.front());
  for (const LayerSpec& l : layers) shape = advance_shape(shape, l);

  Network net;
  net.layers = std::move(layers);
  net.seed = seed;
  net.weights.resize(net.layers.size());
  net.biases.resize(net.layers.size());

  Rng rng(seed);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (l.type == LayerType::kConv1d) {
      const int fan_in = l.in_ch * l.kernel;
      const double limit = std::sqrt(6.0 / fan_in);
      net.weights[i].resize(l.out_ch, fan_in);
      for (Eigen::Index r = 0; r < net.weights[i].rows(); ++r) {
        for (Eigen::Index c = 0; c < net.weights[i].cols(); ++c) {
          net.weights[i](r, c) = rng.uniform(-limit, limit);
        }
      }
      net.biases[i] = Eigen::VectorXd::Zero(l.out_ch);
    } else if (l.type == LayerType::kDense) {
      const double limit = std::sqrt(6.0 / l.in);
      net.weights[i].resize(l.out, l.in);
      for (Eigen::Index r = 0; r < net.weights[i].rows(); ++r) {
        for (Eigen::Index c = 0; c < net.weights[i].cols(); ++c) {
          net.weights[i](r, c) = rng.uniform(-limit, limit);
        }
      }
      net.biases[i] = Eigen::VectorXd::Zero(l.out);
    } else {
      net.weights[i].resize(0, 0);
      net.biases[i].resize(0);
    }
  }
  return net;
}

namespace {

// rows of the unrolled convolution input: row t = [x(t), x(t+d), ...] per tap,
// channels contiguous within a tap
Eigen::MatrixXd im2row(const Eigen::MatrixXd& x, const LayerSpec& l) {
  const Eigen::Index t_out = x.rows() - static_cast<Eigen::Index>(l.kernel - 1) * l.dilation;
  Eigen::MatrixXd unrolled(t_out, static_cast<Eigen::Index>(l.in_ch) * l.kernel);
  for (int k = 0; k < l.kernel; ++k) {
    unrolled.middleCols(static_cast<Eigen::Index>(k) * l.in_ch, l.in_ch) =
        x.middleRows(static_cast<Eigen::Index>(k) * l.dilation, t_out);
  }
  return unrolled;
}

}  // namespace

Eigen::VectorXd stat_pool(const Eigen::MatrixXd& frames) {
  if (frames.rows() < 1) throw ShapeMismatch("stat pool needs at least one frame");
  const Eigen::Index c = frames.cols();
  const double t = static_cast<double>(frames.rows());
  Eigen::VectorXd out(2 * c);
  out.head(c) = frames.colwise().mean();
  for (Eigen::Index j = 0; j < c; ++j) {
    const double var = (frames.col(j).array() - out(j)).square().sum() / t;
    out(c + j) = std::sqrt(var + kStatPoolEps);
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd z = (logits.array() - m).exp();
  return z / z.sum();
}

LossAndGrad softmax_cross_entropy(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) throw InvalidLabel("label out of range");
  const double m = logits.maxCoeff();
  const Eigen::ArrayXd z = logits.array() - m;
  const double lse = std::log(z.exp().sum());
  LossAndGrad out;
  out.loss = lse - z(label);
  out.grad = (z - lse).exp().matrix();
  out.grad(label) -= 1.0;
  return out;
}

ActivationTrace forward(const Network& net, const Signal& input) {
  ActivationTrace trace;
  trace.activations.reserve(net.layers.size() + 1);
  trace.activations.push_back(input);

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const Signal& in = trace.activations.back();
    switch (l.type) {
      case LayerType::kConv1d: {
        const Eigen::MatrixXd& x = as_matrix(in);
        if (x.cols() != l.in_ch) throw ShapeMismatch("conv channel mismatch");
        const Eigen::Index t_out = x.rows() - static_cast<Eigen::Index>(l.kernel - 1) * l.dilation;
        if (t_out < 1) throw ShapeMismatch("input shorter than the conv kernel span");
        Eigen::MatrixXd y = im2row(x, l) * net.weights[i].transpose();
        y.rowwise() += net.biases[i].transpose();
        trace.activations.emplace_back(std::move(y));
        break;
      }
      case LayerType::kRelu: {
        if (std::holds_alternative<Eigen::MatrixXd>(in)) {
          trace.activations.emplace_back(
              Eigen::MatrixXd(std::get<Eigen::MatrixXd>(in).cwiseMax(0.0)));
        } else {
          trace.activations.emplace_back(
              Eigen::VectorXd(std::get<Eigen::VectorXd>(in).cwiseMax(0.0)));
        }
        break;
      }
      case LayerType::kStatPool: {
        trace.activations.emplace_back(stat_pool(as_matrix(in)));
        break;
      }
      case LayerType::kDense: {
        const Eigen::VectorXd& x = as_vector(in);
        if (x.size() != l.in) throw ShapeMismatch("dense input dim mismatch");
        trace.activations.emplace_back(
            Eigen::VectorXd(net.weights[i] * x + net.biases[i]));
        break;
      }
      case LayerType::kSoftmax: {
        trace.activations.emplace_back(softmax(as_vector(in)));
        break;
      }
    }
  }

  trace.logits_index = static_cast<Eigen::Index>(trace.activations.size()) - 1;
  if (!net.layers.empty() && net.layers.back().type == LayerType::kSoftmax) {
    trace.logits_index -= 1;
  }
  as_vector(trace.activations[static_cast<std::size_t>(trace.logits_index)]);
  return trace;
}

const Eigen::VectorXd& ActivationTrace::logits() const {
  return as_vector(activations[static_cast<std::size_t>(logits_index)]);
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.weights.reserve(net.weights.size());
  g.biases.reserve(net.biases.size());
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[i].size()));
  }
  return g;
}

double Gradients::squared_norm() const {
  double acc = 0.0;
  for (const auto& w : weights) acc += w.squaredNorm();
  for (const auto& b : biases) acc += b.squaredNorm();
  return acc;
}

void Gradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

void Gradients::accumulate(const Gradients& other) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
}

Gradients backward(const Network& net, const ActivationTrace& trace,
                   const Eigen::VectorXd& logit_grad) {
  if (trace.activations.size() != net.layers.size() + 1) {
    throw ShapeMismatch("trace does not match the network");
  }
  Gradients grads = zero_gradients(net);

  int start = static_cast<int>(net.layers.size()) - 1;
  if (!net.layers.empty() && net.layers.back().type == LayerType::kSoftmax) start -= 1;
  if (start < 0) return grads;

  if (logit_grad.size() != trace.logits().size()) {
    throw ShapeMismatch("loss gradient does not match the logits");
  }

  Signal grad_signal = logit_grad;
  for (int i = start; i >= 0; --i) {
    const LayerSpec& l = net.layers[i];
    const Signal& in = trace.activations[static_cast<std::size_t>(i)];
    const bool need_input_grad = i > 0;

    switch (l.type) {
      case LayerType::kConv1d: {
        const Eigen::MatrixXd& x = as_matrix(in);
        const Eigen::MatrixXd& g = as_matrix(grad_signal);
        const Eigen::MatrixXd unrolled = im2row(x, l);
        grads.weights[static_cast<std::size_t>(i)] = g.transpose() * unrolled;
        grads.biases[static_cast<std::size_t>(i)] = g.colwise().sum();
        if (need_input_grad) {
          const Eigen::MatrixXd unrolled_grad = g * net.weights[static_cast<std::size_t>(i)];
          Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(x.rows(), x.cols());
          const Eigen::Index t_out = g.rows();
          for (int k = 0; k < l.kernel; ++k) {
            dx.middleRows(static_cast<Eigen::Index>(k) * l.dilation, t_out) +=
                unrolled_grad.middleCols(static_cast<Eigen::Index>(k) * l.in_ch, l.in_ch);
          }
          grad_signal = std::move(dx);
        }
        break;
      }
      case LayerType::kRelu: {
        if (!need_input_grad) break;
        if (std::holds_alternative<Eigen::MatrixXd>(in)) {
          const Eigen::MatrixXd& x = std::get<Eigen::MatrixXd>(in);
          Eigen::MatrixXd g = as_matrix(grad_signal);
          g = (x.array() > 0.0).select(g, 0.0);
          grad_signal = std::move(g);
        } else {
          const Eigen::VectorXd& x = std::get<Eigen::VectorXd>(in);
          Eigen::VectorXd g = as_vector(grad_signal);
          g = (x.array() > 0.0).select(g, 0.0);
          grad_signal = std::move(g);
        }
        break;
      }
      case LayerType::kStatPool: {
        if (!need_input_grad) break;
        const Eigen::MatrixXd& x = as_matrix(in);
        const Eigen::VectorXd& g = as_vector(grad_signal);
        const Eigen::Index c = x.cols();
        const double t = static_cast<double>(x.rows());
        const Eigen::VectorXd pooled = stat_pool(x);
        Eigen::MatrixXd dx(x.rows(), c);
        for (Eigen::Index j = 0; j < c; ++j) {
          const double mean = pooled(j);
          const double sd = pooled(c + j);
          dx.col(j) =
              (g(j) + g(c + j) * (x.col(j).array() - mean) / sd).matrix() / t;
        }
        grad_signal = std::move(dx);
        break;
      }
      case LayerType::kDense: {
        const Eigen::VectorXd& x = as_vector(in);
        const Eigen::VectorXd& g = as_vector(grad_signal);
        grads.weights[static_cast<std::size_t>(i)] = g * x.transpose();
        grads.biases[static_cast<std::size_t>(i)] = g;
        if (need_input_grad) {
          grad_signal =
              Eigen::VectorXd(net.weights[static_cast<std::size_t>(i)].transpose() * g);
        }
        break;
      }
      case LayerType::kSoftmax: {
        if (!need_input_grad) break;
        const Eigen::VectorXd& p = as_vector(trace.activations[static_cast<std::size_t>(i) + 1]);
        const Eigen::VectorXd& g = as_vector(grad_signal);
        const double dot = p.dot(g);
        grad_signal = Eigen::VectorXd(p.array() * (g.array() - dot));
        break;
      }
    }
  }
  return grads;
}

OptimizerState make_optimizer_state(const Network& net) {
  OptimizerState s;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    s.weight_velocity.emplace_back(
        Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
    s.bias_velocity.emplace_back(Eigen::VectorXd::Zero(net.biases[i].size()));
  }
  return s;
}

void sgd_momentum_step(Network& net, const Gradients& grads, OptimizerState& state, double lr,
                       double momentum) {
  if (grads.weights.size() != net.weights.size() ||
      state.weight_velocity.size() != net.weights.size()) {
    throw ShapeMismatch("gradient/state does not match the network");
  }
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (grads.weights[i].rows() != net.weights[i].rows() ||
        grads.weights[i].cols() != net.weights[i].cols() ||
        grads.biases[i].size() != net.biases[i].size()) {
      throw ShapeMismatch("gradient shape mismatch");
    }
    state.weight_velocity[i] = momentum * state.weight_velocity[i] + grads.weights[i];
    state.bias_velocity[i] = momentum * state.bias_velocity[i] + grads.biases[i];
    net.weights[i] -= lr * state.weight_velocity[i];
    net.biases[i] -= lr * state.bias_velocity[i];
  }
}

double learning_rate_for_epoch(const TrainConfig& cfg, int epoch) {
  if (cfg.epochs <= 1) return cfg.lr_start;
  const double frac = static_cast<double>(epoch) / (cfg.epochs - 1);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

TrainResult train(Network& net, const std::vector<TrainSample>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw EmptyDataset("training set is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw InvalidConfig("bad train config");
  if (!(cfg.lr_end > 0.0) || cfg.lr_end > cfg.lr_start) {
    throw InvalidConfig("need 0 < lr_end <= lr_start");
  }
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw InvalidConfig("need 0 <= momentum < 1");

  ActivationTrace probe = forward(net, dataset.front().input);
  const Eigen::Index n_out = probe.logits().size();
  for (const TrainSample& s : dataset) {
    if (s.label < 0 || s.label >= n_out) throw LabelOutOfRange("label exceeds the output layer");
  }

  TrainResult result;
  OptimizerState state = make_optimizer_state(net);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate_for_epoch(cfg, epoch);
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    bool stop = false;

    for (std::size_t begin = 0; begin < order.size() && !stop; begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      Gradients batch = zero_gradients(net);
      for (std::size_t k = begin; k < end; ++k) {
        const TrainSample& s = dataset[order[k]];
        ActivationTrace trace = forward(net, s.input);
        const LossAndGrad lg = softmax_cross_entropy(trace.logits(), s.label);
        loss_sum += lg.loss;
        batch.accumulate(backward(net, trace, lg.grad));
      }
      seen += end - begin;
      batch.scale(1.0 / static_cast<double>(end - begin));
      if (std::sqrt(batch.squared_norm()) < cfg.min_gradient_norm) {
        stop = true;
        break;
      }
      sgd_momentum_step(net, batch, state, lr, cfg.momentum);
    }

    EpochStats stats;
    stats.lr = lr;
    stats.mean_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    result.history.push_back(stats);
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

namespace {

struct ParamSlot {
  bool is_bias = false;
  std::size_t layer = 0;
  std::size_t offset = 0;
};

ParamSlot locate_parameter(const Network& net, std::size_t flat_index) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::size_t w = static_cast<std::size_t>(net.weights[i].size());
    if (flat_index < w) return {false, i, flat_index};
    flat_index -= w;
    const std::size_t b = static_cast<std::size_t>(net.biases[i].size());
    if (flat_index < b) return {true, i, flat_index};
    flat_index -= b;
  }
  throw ShapeMismatch("parameter index out of range");
}

}  // namespace

double get_parameter(const Network& net, std::size_t flat_index) {
  const ParamSlot s = locate_parameter(net, flat_index);
  if (s.is_bias) return net.biases[s.layer](static_cast<Eigen::Index>(s.offset));
  const Eigen::Index cols = net.weights[s.layer].cols();
  return net.weights[s.layer](static_cast<Eigen::Index>(s.offset / cols),
                              static_cast<Eigen::Index>(s.offset % cols));
}

void set_parameter(Network& net, std::size_t flat_index, double value) {
  const ParamSlot s = locate_parameter(net, flat_index);
  if (s.is_bias) {
    net.biases[s.layer](static_cast<Eigen::Index>(s.offset)) = value;
  } else {
    const Eigen::Index cols = net.weights[s.layer].cols();
    net.weights[s.layer](static_cast<Eigen::Index>(s.offset / cols),
                         static_cast<Eigen::Index>(s.offset % cols)) = value;
  }
}

double get_gradient(const Gradients& grads, std::size_t flat_index) {
  for (std::size_t i = 0; i < grads.weights.size(); ++i) {
    const std::size_t w = static_cast<std::size_t>(grads.weights[i].size());
    if (flat_index < w) {
      const Eigen::Index cols = grads.weights[i].cols();
      return grads.weights[i](static_cast<Eigen::Index>(flat_index / cols),
                              static_cast<Eigen::Index>(flat_index % cols));
    }
    flat_index -= w;
    const std::size_t b = static_cast<std::size_t>(grads.biases[i].size());
    if (flat_index < b) return grads.biases[i](static_cast<Eigen::Index>(flat_index));
    flat_index -= b;
  }
  throw ShapeMismatch("gradient index out of range");
}

double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  if (analytic.size() != numeric.size()) throw ShapeMismatch("gradient sample size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

std::vector<double> numeric_gradient(const Network& net, const Signal& input, int label,
                                     double eps, const std::vector<std::size_t>& indices) {
  Network work = net;
  std::vector<double> out(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t idx = indices[k];
    const double original = get_parameter(work, idx);
    set_parameter(work, idx, original + eps);
    const double loss_plus =
        softmax_cross_entropy(forward(work, input).logits(), label).loss;
    set_parameter(work, idx, original - eps);
    const double loss_minus =
        softmax_cross_entropy(forward(work, input).logits(), label).loss;
    set_parameter(work, idx, original);
    out[k] = (loss_plus - loss_minus) / (2.0 * eps);
  }
  return out;
}

std::vector<std::size_t> sample_parameter_indices(const Network& net, double fraction,
                                                  std::size_t min_count, Rng& rng) {
  const std::size_t total = net.parameter_count();
  std::size_t count = std::max(min_count,
                               static_cast<std::size_t>(fraction * static_cast<double>(total)));
  count = std::min(count, total);
  std::vector<std::size_t> pool(total);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(total - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

double gradient_check(const Network& net, const Signal& input, int label, double eps) {
  if (eps < 1e-7 || eps > 1e-3) throw InvalidRange("eps must lie in [1e-7, 1e-3]");
  Rng rng(mix_seed(net.seed, 0x67726164ULL));
  const std::vector<std::size_t> indices = sample_parameter_indices(net, 0.01, 50, rng);

  ActivationTrace trace = forward(net, input);
  const LossAndGrad lg = softmax_cross_entropy(trace.logits(), label);
  const Gradients grads = backward(net, trace, lg.grad);

  std::vector<double> analytic(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    analytic[k] = get_gradient(grads, indices[k]);
  }
  const std::vector<double> numeric = numeric_gradient(net, input, label, eps, indices);
  return max_relative_error(analytic, numeric);
}

int argmax_lowest(const Eigen::VectorXd& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

int predict_class(const Network& net, const Signal& input) {
  const ActivationTrace trace = forward(net, input);
  return argmax_lowest(as_vector(trace.activations.back()));
}

void save_network(const std::string& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_magic(os, "FBNN");
  write_u32(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const LayerSpec& l : net.layers) {
    write_u32(os, static_cast<std::uint32_t>(l.type));
    if (l.type == LayerType::kConv1d) {
      write_u32(os, static_cast<std::uint32_t>(l.in_ch));
      write_u32(os, static_cast<std::uint32_t>(l.out_ch));
      write_u32(os, static_cast<std::uint32_t>(l.kernel));
      write_u32(os, static_cast<std::uint32_t>(l.dilation));
    } else if (l.type == LayerType::kDense) {
      write_u32(os, static_cast<std::uint32_t>(l.in));
      write_u32(os, static_cast<std::uint32_t>(l.out));
    }
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (Eigen::Index r = 0; r < net.weights[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[i].cols(); ++c) {
        write_f32(os, static_cast<float>(net.weights[i](r, c)));
      }
    }
    for (Eigen::Index r = 0; r < net.biases[i].size(); ++r) {
      write_f32(os, static_cast<float>(net.biases[i](r)));
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  expect_magic(is, "FBNN");
  const std::uint32_t n_layers = read_u32(is);
  std::vector<LayerSpec> layers;
  layers.reserve(n_layers);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint32_t tag = read_u32(is);
    switch (static_cast<LayerType>(tag)) {
      case LayerType::kConv1d: {
        const int in_ch = static_cast<int>(read_u32(is));
        const int out_ch = static_cast<int>(read_u32(is));
        const int kernel = static_cast<int>(read_u32(is));
        const int dilation = static_cast<int>(read_u32(is));
        layers.push_back(LayerSpec::conv1d(in_ch, out_ch, kernel, dilation));
        break;
      }
      case LayerType::kRelu:
        layers.push_back(LayerSpec::relu());
        break;
      case LayerType::kStatPool:
        layers.push_back(LayerSpec::stat_pool());
        break;
      case LayerType::kDense: {
        const int in = static_cast<int>(read_u32(is));
        const int out = static_cast<int>(read_u32(is));
        layers.push_back(LayerSpec::dense(in, out));
        break;
      }
      case LayerType::kSoftmax:
        layers.push_back(LayerSpec::softmax());
        break;
      default:
        throw CorruptFile("unknown layer tag: " + path);
    }
  }
  Network net = make_network(std::move(layers), 0);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    for (Eigen::Index r = 0; r < net.weights[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[i].cols(); ++c) {
        net.weights[i](r, c) = read_f32(is);
      }
    }
    for (Eigen::Index r = 0; r < net.biases[i].size(); ++r) {
      net.biases[i](r) = read_f32(is);
    }
  }
  return net;
}

Eigen::VectorXd SoftmaxClassifier::logits(const Eigen::VectorXd& x) const {
  if (x.size() != weight.cols()) throw DimMismatch("classifier input dim mismatch");
  return weight * x + bias;
}

Eigen::VectorXd SoftmaxClassifier::posterior(const Eigen::VectorXd& x) const {
  return softmax(logits(x));
}

int SoftmaxClassifier::predict(const Eigen::VectorXd& x) const { return argmax_lowest(logits(x)); }

SoftmaxClassifier train_softmax_classifier(const std::vector<Eigen::VectorXd>& inputs,
                                           const std::vector<int>& labels, int n_classes,
                                           const TrainConfig& cfg) {
  if (inputs.empty()) throw EmptyDataset("no training vectors");
  if (inputs.size() != labels.size()) throw ShapeMismatch("inputs/labels size mismatch");
  const int dim = static_cast<int>(inputs.front().size());

  Network net = make_network({LayerSpec::dense(dim, n_classes), LayerSpec::softmax()}, cfg.seed);
  std::vector<TrainSample> samples;
  samples.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != dim) throw DimMismatch("inconsistent input dims");
    samples.push_back({inputs[i], labels[i]});
  }
  train(net, samples, cfg);

  SoftmaxClassifier model;
  model.weight = net.weights[0];
  model.bias = net.biases[0];
  return model;
}

}  // namespace fusebio
