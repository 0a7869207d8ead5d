#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ayrl/rng.hpp"

namespace ayrl {

enum class Activation : std::uint8_t { kRelu = 0, kIdentity = 1 };

enum class HeadKind : std::uint8_t {
  kScalarValue = 0,       // one output: v(s)
  kActionValues = 1,      // |A| outputs: Q(s, a)
  kActionPreferences = 2, // |A| outputs: unnormalised policy preferences
  kDueling = 3,           // value + advantage branches combined into Q(s, a)
};

struct LayerSpec {
  int input_width = 0;
  int output_width = 0;
  Activation activation = Activation::kRelu;
};

/// One dense layer's parameters. Weights are (output_width x input_width),
/// applied to row-major batches as X * W^T + b.
struct ParamBlock {
  Eigen::MatrixXd weights;
  Eigen::VectorXd biases;
};

/// Per-parameter gradients, same block layout as the network that produced
/// them.
class GradientBundle {
 public:
  GradientBundle() = default;
  explicit GradientBundle(std::vector<ParamBlock> blocks) : blocks_(std::move(blocks)) {}

  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  bool all_finite() const;
  double global_norm() const;
  void scale(double factor);

 private:
  std::vector<ParamBlock> blocks_;
};

/// If the global L2 norm exceeds max_norm, rescales every entry by
/// max_norm / norm. Returns the pre-clip norm.
double clip_gradients(GradientBundle& grads, double max_norm);

/// Eq. combining a scalar value and per-action advantages into Q-values with
/// the mean advantage subtracted, so the decomposition is identifiable.
Eigen::VectorXd dueling_combine(double value, const Eigen::VectorXd& advantages);

/// Activations recorded by a forward pass, consumed by backward.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each block
  std::vector<Eigen::MatrixXd> pre;          // pre-activation of each block
  Eigen::MatrixXd dueling_value;             // (n x 1), dueling head only
  Eigen::MatrixXd dueling_advantage;         // (n x |A|), dueling head only
  const void* net = nullptr;
  std::uint64_t param_version = 0;
  long batch = 0;
};

/// Dense multilayer perceptron: relu hidden trunk plus an identity-activated
/// output head. The dueling head splits into a scalar value branch and an
/// advantage branch off the shared trunk.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  MlpNetwork(int input_width, const std::vector<int>& hidden_widths, HeadKind head,
             int num_actions = 4);

  /// He-style uniform fan-in initialisation for the relu trunk; zero biases.
  void init_params(Rng& rng);

  /// inputs: (n x input_width). Returns (n x output_width). A cache, when
  /// given, records what backward needs.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, ForwardCache* cache = nullptr) const;

  /// Single-sample convenience wrapper.
  Eigen::VectorXd forward_vec(const Eigen::VectorXd& input) const;

  /// Gradients of sum_ij output_grads(i,j) * output(i,j) with respect to all
  /// parameters. The cache must come from a forward call on this network with
  /// the current parameters.
  GradientBundle backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grads) const;

  GradientBundle zero_gradients() const;

  int input_width() const { return input_width_; }
  int output_width() const;
  int num_actions() const { return num_actions_; }
  HeadKind head() const { return head_; }
  const std::vector<LayerSpec>& trunk_specs() const { return trunk_specs_; }

  std::vector<ParamBlock>& blocks() { return blocks_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  /// Parameters changed outside apply_step (tests, manual edits): call this
  /// so outstanding caches are invalidated.
  void bump_version() { ++param_version_; }
  std::uint64_t param_version() const { return param_version_; }

  void save(std::ostream& out) const;
  static MlpNetwork load(std::istream& in);

 private:
  int input_width_ = 0;
  int num_actions_ = 4;
  HeadKind head_ = HeadKind::kScalarValue;
  std::vector<LayerSpec> trunk_specs_;
  std::vector<ParamBlock> blocks_;  // trunk blocks, then head block(s); dueling: value then advantage
  std::uint64_t param_version_ = 0;

  int trunk_output_width() const;
};

/// Adam with bias correction. Moments are laid out like the parameter blocks
/// they track.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);

  void attach(const std::vector<ParamBlock>& params);

  /// One update. Throws NumericError on non-finite gradients; bumps the
  /// network's parameter version.
  void step(MlpNetwork& net, const GradientBundle& grads);

  void set_learning_rate(double lr) { learning_rate_ = lr; }
  double learning_rate() const { return learning_rate_; }
  long step_count() const { return step_count_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  double learning_rate_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double epsilon_ = 1e-8;
  long step_count_ = 0;
  std::vector<ParamBlock> first_moment_;
  std::vector<ParamBlock> second_moment_;
};

/// Geometric learning-rate decay at decay_number evenly spaced frames.
struct LrSchedule {
  double initial_rate = 1e-3;
  double decay_factor = 0.5;
  long decay_number = 0;
  long total_frames = 1;
};

double scheduled_rate(const LrSchedule& schedule, long frame);

/// Numerically stable softmax (max subtraction).
Eigen::VectorXd softmax_policy(const Eigen::VectorXd& preferences);

/// -sum p ln p with probabilities floored at 1e-12 inside the log.
double categorical_entropy(const Eigen::VectorXd& probs);

/// Log of softmax_policy(preferences), computed without forming the
/// probabilities.
Eigen::VectorXd log_softmax(const Eigen::VectorXd& preferences);

int sample_categorical(const Eigen::VectorXd& probs, Rng& rng);

}  // namespace ayrl
