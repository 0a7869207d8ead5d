#include "ayrl/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "ayrl/errors.hpp"
#include "binary_io.hpp"

namespace ayrl {

namespace {
constexpr char kNetMagic[] = "AYRLNET1";

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::kIdentity) return pre;
  return pre.cwiseMax(0.0);
}
}  // namespace

bool GradientBundle::all_finite() const {
  for (const auto& b : blocks_) {
    if (!b.weights.allFinite() || !b.biases.allFinite()) return false;
  }
  return true;
}

double GradientBundle::global_norm() const {
  double sq = 0.0;
  for (const auto& b : blocks_) {
    sq += b.weights.squaredNorm() + b.biases.squaredNorm();
  }
  return std::sqrt(sq);
}

void GradientBundle::scale(double factor) {
  for (auto& b : blocks_) {
    b.weights *= factor;
    b.biases *= factor;
  }
}

double clip_gradients(GradientBundle& grads, double max_norm) {
  if (max_norm <= 0.0) throw UsageError("clip_gradients: max_norm must be positive");
  const double norm = grads.global_norm();
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

Eigen::VectorXd dueling_combine(double value, const Eigen::VectorXd& advantages) {
  if (advantages.size() == 0) throw UsageError("dueling_combine: empty advantage vector");
  const double mean = advantages.mean();
  return Eigen::VectorXd::Constant(advantages.size(), value - mean) + advantages;
}

MlpNetwork::MlpNetwork(int input_width, const std::vector<int>& hidden_widths, HeadKind head,
                       int num_actions)
    : input_width_(input_width), num_actions_(num_actions), head_(head) {
  if (input_width <= 0) throw UsageError("MlpNetwork: input width must be positive");
  if (num_actions < 1) throw UsageError("MlpNetwork: need at least one action");
  int prev = input_width;
  for (int w : hidden_widths) {
    if (w <= 0) throw UsageError("MlpNetwork: layer widths must be positive");
    trunk_specs_.push_back({prev, w, Activation::kRelu});
    prev = w;
  }
  for (const auto& spec : trunk_specs_) {
    blocks_.push_back({Eigen::MatrixXd::Zero(spec.output_width, spec.input_width),
                       Eigen::VectorXd::Zero(spec.output_width)});
  }
  if (head_ == HeadKind::kDueling) {
    blocks_.push_back({Eigen::MatrixXd::Zero(1, prev), Eigen::VectorXd::Zero(1)});
    blocks_.push_back(
        {Eigen::MatrixXd::Zero(num_actions_, prev), Eigen::VectorXd::Zero(num_actions_)});
  } else {
    const int out = head_ == HeadKind::kScalarValue ? 1 : num_actions_;
    blocks_.push_back({Eigen::MatrixXd::Zero(out, prev), Eigen::VectorXd::Zero(out)});
  }
}

int MlpNetwork::trunk_output_width() const {
  return trunk_specs_.empty() ? input_width_ : trunk_specs_.back().output_width;
}

int MlpNetwork::output_width() const {
  switch (head_) {
    case HeadKind::kScalarValue:
      return 1;
    default:
      return num_actions_;
  }
}

void MlpNetwork::init_params(Rng& rng) {
  for (auto& block : blocks_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(block.weights.cols()));
    for (Eigen::Index r = 0; r < block.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < block.weights.cols(); ++c)
        block.weights(r, c) = rng.uniform(-limit, limit);
    block.biases.setZero();
  }
  bump_version();
}

Eigen::MatrixXd MlpNetwork::forward(const Eigen::MatrixXd& inputs, ForwardCache* cache) const {
  if (inputs.cols() != input_width_) {
    throw UsageError("forward: input width " + std::to_string(inputs.cols()) + " != " +
                     std::to_string(input_width_));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->net = this;
    cache->param_version = param_version_;
    cache->batch = inputs.rows();
  }

  Eigen::MatrixXd x = inputs;
  std::size_t block_idx = 0;
  for (const auto& spec : trunk_specs_) {
    const auto& b = blocks_[block_idx++];
    Eigen::MatrixXd pre = x * b.weights.transpose();
    pre.rowwise() += b.biases.transpose();
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(pre);
    }
    x = apply_activation(pre, spec.activation);
  }

  if (head_ == HeadKind::kDueling) {
    const auto& vb = blocks_[block_idx];
    const auto& ab = blocks_[block_idx + 1];
    Eigen::MatrixXd value = x * vb.weights.transpose();
    value.rowwise() += vb.biases.transpose();
    Eigen::MatrixXd adv = x * ab.weights.transpose();
    adv.rowwise() += ab.biases.transpose();
    Eigen::MatrixXd q = adv;
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      q.row(r).array() += value(r, 0) - adv.row(r).mean();
    }
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->dueling_value = std::move(value);
      cache->dueling_advantage = std::move(adv);
    }
    return q;
  }

  const auto& hb = blocks_[block_idx];
  Eigen::MatrixXd out = x * hb.weights.transpose();
  out.rowwise() += hb.biases.transpose();
  if (cache) {
    cache->inputs.push_back(std::move(x));
    cache->pre.push_back(out);
  }
  return out;
}

Eigen::VectorXd MlpNetwork::forward_vec(const Eigen::VectorXd& input) const {
  Eigen::MatrixXd row = input.transpose();
  return forward(row).row(0).transpose();
}

GradientBundle MlpNetwork::backward(const ForwardCache& cache,
                                    const Eigen::MatrixXd& output_grads) const {
  if (cache.net != this || cache.param_version != param_version_) {
    throw UsageError("backward: cache does not match the network's current parameters");
  }
  if (output_grads.rows() != cache.batch || output_grads.cols() != output_width()) {
    throw UsageError("backward: output gradient shape mismatch");
  }

  GradientBundle grads = zero_gradients();
  auto& gb = grads.blocks();
  Eigen::MatrixXd dx;  // gradient flowing into the trunk output

  if (head_ == HeadKind::kDueling) {
    const std::size_t vi = trunk_specs_.size();
    const std::size_t ai = vi + 1;
    const Eigen::MatrixXd& trunk_out = cache.inputs.back();
    // q = v + a - mean(a): dv = rowsum(g), da = g - rowmean(g)
    Eigen::VectorXd dvalue = output_grads.rowwise().sum();
    Eigen::MatrixXd dadv = output_grads;
    for (Eigen::Index r = 0; r < dadv.rows(); ++r) {
      dadv.row(r).array() -= output_grads.row(r).mean();
    }
    gb[vi].weights.noalias() = dvalue.transpose() * trunk_out;  // (1 x n) * (n x w)
    gb[vi].biases[0] = dvalue.sum();
    gb[ai].weights.noalias() = dadv.transpose() * trunk_out;
    gb[ai].biases = dadv.colwise().sum().transpose();
    dx.noalias() = dvalue * blocks_[vi].weights + dadv * blocks_[ai].weights;
  } else {
    const std::size_t hi = trunk_specs_.size();
    const Eigen::MatrixXd& head_in = cache.inputs.back();
    gb[hi].weights.noalias() = output_grads.transpose() * head_in;
    gb[hi].biases = output_grads.colwise().sum().transpose();
    dx.noalias() = output_grads * blocks_[hi].weights;
  }

  for (int layer = static_cast<int>(trunk_specs_.size()) - 1; layer >= 0; --layer) {
    const auto idx = static_cast<std::size_t>(layer);
    Eigen::MatrixXd dpre =
        ((cache.pre[idx].array() > 0.0).cast<double>() * dx.array()).matrix();  // relu mask
    gb[idx].weights.noalias() = dpre.transpose() * cache.inputs[idx];
    gb[idx].biases = dpre.colwise().sum().transpose();
    if (layer > 0) dx.noalias() = dpre * blocks_[idx].weights;
  }

  if (!grads.all_finite()) throw NumericError("backward: non-finite gradient");
  return grads;
}

GradientBundle MlpNetwork::zero_gradients() const {
  std::vector<ParamBlock> zeros;
  zeros.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    zeros.push_back({Eigen::MatrixXd::Zero(b.weights.rows(), b.weights.cols()),
                     Eigen::VectorXd::Zero(b.biases.size())});
  }
  return GradientBundle(std::move(zeros));
}

void MlpNetwork::save(std::ostream& out) const {
  io::put_magic(out, kNetMagic);
  io::put_pod<std::uint32_t>(out, 1);  // format version
  io::put_pod<std::uint8_t>(out, static_cast<std::uint8_t>(head_));
  io::put_pod<std::int32_t>(out, input_width_);
  io::put_pod<std::int32_t>(out, num_actions_);
  io::put_pod<std::uint64_t>(out, trunk_specs_.size());
  for (const auto& spec : trunk_specs_) {
    io::put_pod<std::int32_t>(out, spec.input_width);
    io::put_pod<std::int32_t>(out, spec.output_width);
    io::put_pod<std::uint8_t>(out, static_cast<std::uint8_t>(spec.activation));
  }
  for (const auto& block : blocks_) {
    io::put_matrix(out, block.weights);
    io::put_vector(out, block.biases);
  }
}

MlpNetwork MlpNetwork::load(std::istream& in) {
  io::expect_magic(in, kNetMagic);
  const auto version = io::get_pod<std::uint32_t>(in);
  if (version != 1) throw ConfigError("unsupported network snapshot version");
  const auto head = static_cast<HeadKind>(io::get_pod<std::uint8_t>(in));
  const auto input_width = io::get_pod<std::int32_t>(in);
  const auto num_actions = io::get_pod<std::int32_t>(in);
  const auto n_trunk = io::get_pod<std::uint64_t>(in);
  std::vector<int> hidden;
  for (std::uint64_t i = 0; i < n_trunk; ++i) {
    io::get_pod<std::int32_t>(in);  // input width, implied by the chain
    hidden.push_back(io::get_pod<std::int32_t>(in));
    io::get_pod<std::uint8_t>(in);
  }
  MlpNetwork net(input_width, hidden, head, num_actions);
  for (auto& block : net.blocks_) {
    block.weights = io::get_matrix(in);
    block.biases = io::get_vector(in);
  }
  net.bump_version();
  return net;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (learning_rate <= 0.0) throw UsageError("Adam: learning rate must be positive");
}

void AdamOptimizer::attach(const std::vector<ParamBlock>& params) {
  first_moment_.clear();
  second_moment_.clear();
  step_count_ = 0;
  for (const auto& p : params) {
    first_moment_.push_back({Eigen::MatrixXd::Zero(p.weights.rows(), p.weights.cols()),
                             Eigen::VectorXd::Zero(p.biases.size())});
    second_moment_.push_back({Eigen::MatrixXd::Zero(p.weights.rows(), p.weights.cols()),
                              Eigen::VectorXd::Zero(p.biases.size())});
  }
}

void AdamOptimizer::step(MlpNetwork& net, const GradientBundle& grads) {
  auto& params = net.blocks();
  if (first_moment_.size() != params.size()) {
    throw UsageError("Adam: optimizer not attached to this parameter set");
  }
  if (!grads.all_finite()) throw NumericError("Adam: non-finite gradient rejected");

  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads.blocks()[i];
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    m.weights = beta1_ * m.weights + (1.0 - beta1_) * g.weights;
    m.biases = beta1_ * m.biases + (1.0 - beta1_) * g.biases;
    v.weights = beta2_ * v.weights + (1.0 - beta2_) * g.weights.cwiseProduct(g.weights);
    v.biases = beta2_ * v.biases + (1.0 - beta2_) * g.biases.cwiseProduct(g.biases);

    params[i].weights.array() -=
        learning_rate_ * (m.weights.array() / bc1) / ((v.weights.array() / bc2).sqrt() + epsilon_);
    params[i].biases.array() -=
        learning_rate_ * (m.biases.array() / bc1) / ((v.biases.array() / bc2).sqrt() + epsilon_);
  }
  net.bump_version();
}

void AdamOptimizer::save(std::ostream& out) const {
  io::put_pod<double>(out, learning_rate_);
  io::put_pod<double>(out, beta1_);
  io::put_pod<double>(out, beta2_);
  io::put_pod<double>(out, epsilon_);
  io::put_pod<std::int64_t>(out, step_count_);
  io::put_pod<std::uint64_t>(out, first_moment_.size());
  for (std::size_t i = 0; i < first_moment_.size(); ++i) {
    io::put_matrix(out, first_moment_[i].weights);
    io::put_vector(out, first_moment_[i].biases);
    io::put_matrix(out, second_moment_[i].weights);
    io::put_vector(out, second_moment_[i].biases);
  }
}

void AdamOptimizer::load(std::istream& in) {
  learning_rate_ = io::get_pod<double>(in);
  beta1_ = io::get_pod<double>(in);
  beta2_ = io::get_pod<double>(in);
  epsilon_ = io::get_pod<double>(in);
  step_count_ = io::get_pod<std::int64_t>(in);
  const auto n = io::get_pod<std::uint64_t>(in);
  first_moment_.assign(n, {});
  second_moment_.assign(n, {});
  for (std::uint64_t i = 0; i < n; ++i) {
    first_moment_[i].weights = io::get_matrix(in);
    first_moment_[i].biases = io::get_vector(in);
    second_moment_[i].weights = io::get_matrix(in);
    second_moment_[i].biases = io::get_vector(in);
  }
}

double scheduled_rate(const LrSchedule& schedule, long frame) {
  if (frame < 0) throw UsageError("scheduled_rate: negative frame");
  if (schedule.decay_number <= 0) return schedule.initial_rate;
  long completed = (frame * schedule.decay_number) / schedule.total_frames;
  if (completed > schedule.decay_number) completed = schedule.decay_number;
  return schedule.initial_rate * std::pow(schedule.decay_factor, static_cast<double>(completed));
}

Eigen::VectorXd softmax_policy(const Eigen::VectorXd& preferences) {
  if (preferences.size() == 0) throw UsageError("softmax_policy: empty input");
  const double shift = preferences.maxCoeff();
  Eigen::VectorXd exps = (preferences.array() - shift).exp();
  return exps / exps.sum();
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& preferences) {
  const double shift = preferences.maxCoeff();
  const double log_sum = std::log((preferences.array() - shift).exp().sum());
  return preferences.array() - shift - log_sum;
}

double categorical_entropy(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    h -= probs[i] * std::log(std::max(probs[i], 1e-12));
  }
  return h;
}

int sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
  if (probs.size() == 0) throw UsageError("sample_categorical: empty distribution");
  const double u = rng.uniform();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace ayrl
