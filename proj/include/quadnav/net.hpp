#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "quadnav/random.hpp"

namespace quadnav {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Dense ReLU network parameters stored contiguously in a fixed order:
// W0, b0, W1, b1, ..., then log_std when present. Weights are column-major
// (out x in). The same class holds gradients, which share the layout.
class MlpParams {
 public:
  MlpParams() = default;
  // layer_sizes = {in, hidden..., out}.
  MlpParams(std::vector<std::size_t> layer_sizes, std::size_t log_std_dim);

  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t in_dim() const { return sizes_.front(); }
  std::size_t out_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t log_std_dim() const { return log_std_dim_; }

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;
  Eigen::Map<Vector> log_std();
  Eigen::Map<const Vector> log_std() const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::size_t size() const { return data_.size(); }

  // Zero-filled parameters of identical layout.
  MlpParams zeros_like() const;
  bool same_layout(const MlpParams& other) const {
    return sizes_ == other.sizes_ && log_std_dim_ == other.log_std_dim_;
  }
  bool operator==(const MlpParams&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  std::size_t log_std_dim_ = 0;
  std::vector<std::size_t> offsets_;  // start of W_l at 2l, b_l at 2l+1
  std::vector<double> data_;
};

using Gradients = MlpParams;

MlpParams make_policy_params(std::size_t obs_dim, std::size_t act_dim, std::size_t hidden);
MlpParams make_value_params(std::size_t obs_dim, std::size_t hidden);

// Orthogonal weights scaled by gains[l] per layer, zero biases, log_std = log_std_init.
void init_orthogonal(MlpParams& params, std::span<const double> gains, Rng& rng,
                     double log_std_init = 0.0);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> hidden;  // post-ReLU activations, one per hidden layer
};

// Columns are samples: x is in_dim x B, result out_dim x B.
// h_l = relu(W_l h_{l-1} + b_l) for hidden layers, linear output.
// Throws std::invalid_argument on shape mismatch.
Matrix mlp_forward(const MlpParams& params, const Eigen::Ref<const Matrix>& x,
                   ForwardCache* cache = nullptr);

// Reverse-mode gradient of sum_b <grad_out[:, b], y[:, b]> with respect to
// the weights and biases (log_std entries are left zero). Throws
// std::invalid_argument when the cache does not match params or grad_out.
Gradients backward(const MlpParams& params, const ForwardCache& cache,
                   const Eigen::Ref<const Matrix>& grad_out);

struct GaussianEval {
  Vector log_prob;  // per sample
  Vector entropy;   // per sample
};

// Diagonal Gaussian with state-independent log_std; columns are samples.
GaussianEval gaussian_head(const Eigen::Ref<const Matrix>& mean, const Eigen::Ref<const Vector>& log_std,
                           const Eigen::Ref<const Matrix>& action);

// d log_prob / d mean, per sample (same shape as mean).
Matrix gaussian_log_prob_grad_mean(const Eigen::Ref<const Matrix>& mean,
                                   const Eigen::Ref<const Vector>& log_std,
                                   const Eigen::Ref<const Matrix>& action);
// d log_prob / d log_std, per sample (act_dim x B).
Matrix gaussian_log_prob_grad_log_std(const Eigen::Ref<const Matrix>& mean,
                                      const Eigen::Ref<const Vector>& log_std,
                                      const Eigen::Ref<const Matrix>& action);

// a = mean + exp(log_std) * z, z ~ N(0, 1) drawn column by column.
Matrix sample_action(const Eigen::Ref<const Matrix>& mean, const Eigen::Ref<const Vector>& log_std,
                     RandomSource& rng);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const MlpParams& params, const AdamConfig& config);

// Bias-corrected Adam step in place.
void adam_update(MlpParams& params, const Gradients& grads, AdamState& state);

void clamp_log_std(MlpParams& params);

}  // namespace quadnav
