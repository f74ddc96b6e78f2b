#include "quadnav/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace quadnav {

MlpParams::MlpParams(std::vector<std::size_t> layer_sizes, std::size_t log_std_dim)
    : sizes_(std::move(layer_sizes)), log_std_dim_(log_std_dim) {
  if (sizes_.size() < 2) throw std::invalid_argument("MlpParams: need at least in and out sizes");
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offset);
    offset += sizes_[l + 1] * sizes_[l];
    offsets_.push_back(offset);
    offset += sizes_[l + 1];
  }
  offsets_.push_back(offset);
  data_.assign(offset + log_std_dim_, 0.0);
}

Eigen::Map<Matrix> MlpParams::weight(std::size_t l) {
  return {data_.data() + offsets_.at(2 * l), static_cast<Eigen::Index>(sizes_[l + 1]),
          static_cast<Eigen::Index>(sizes_[l])};
}
Eigen::Map<const Matrix> MlpParams::weight(std::size_t l) const {
  return {data_.data() + offsets_.at(2 * l), static_cast<Eigen::Index>(sizes_[l + 1]),
          static_cast<Eigen::Index>(sizes_[l])};
}
Eigen::Map<Vector> MlpParams::bias(std::size_t l) {
  return {data_.data() + offsets_.at(2 * l + 1), static_cast<Eigen::Index>(sizes_[l + 1])};
}
Eigen::Map<const Vector> MlpParams::bias(std::size_t l) const {
  return {data_.data() + offsets_.at(2 * l + 1), static_cast<Eigen::Index>(sizes_[l + 1])};
}
Eigen::Map<Vector> MlpParams::log_std() {
  return {data_.data() + offsets_.back(), static_cast<Eigen::Index>(log_std_dim_)};
}
Eigen::Map<const Vector> MlpParams::log_std() const {
  return {data_.data() + offsets_.back(), static_cast<Eigen::Index>(log_std_dim_)};
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out = *this;
  std::fill(out.data_.begin(), out.data_.end(), 0.0);
  return out;
}

MlpParams make_policy_params(std::size_t obs_dim, std::size_t act_dim, std::size_t hidden) {
  return MlpParams({obs_dim, hidden, hidden, act_dim}, act_dim);
}

MlpParams make_value_params(std::size_t obs_dim, std::size_t hidden) {
  return MlpParams({obs_dim, hidden, hidden, 1}, 0);
}

void init_orthogonal(MlpParams& params, std::span<const double> gains, Rng& rng,
                     double log_std_init) {
  if (gains.size() != params.num_layers()) {
    throw std::invalid_argument("init_orthogonal: one gain per layer required");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    auto w = params.weight(l);
    const Eigen::Index rows = w.rows();
    const Eigen::Index cols = w.cols();
    const bool tall = rows >= cols;
    Matrix a(tall ? rows : cols, tall ? cols : rows);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    }
    if (tall) {
      w = gains[l] * q;
    } else {
      w = gains[l] * q.transpose();
    }
    params.bias(l).setZero();
  }
  params.log_std().setConstant(log_std_init);
}

Matrix mlp_forward(const MlpParams& params, const Eigen::Ref<const Matrix>& x, ForwardCache* cache) {
  if (static_cast<std::size_t>(x.rows()) != params.in_dim() || x.cols() < 1) {
    throw std::invalid_argument("mlp_forward: expected " + std::to_string(params.in_dim()) +
                                " x B input, got " + std::to_string(x.rows()) + " x " +
                                std::to_string(x.cols()));
  }
  const std::size_t layers = params.num_layers();
  if (cache != nullptr) {
    cache->input = x;
    cache->hidden.resize(layers - 1);
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = params.weight(l) * h;
    z.colwise() += params.bias(l);
    if (l + 1 < layers) {
      h = z.cwiseMax(0.0);
      if (cache != nullptr) cache->hidden[l] = h;
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Gradients backward(const MlpParams& params, const ForwardCache& cache,
                   const Eigen::Ref<const Matrix>& grad_out) {
  const std::size_t layers = params.num_layers();
  const Eigen::Index batch = cache.input.cols();
  if (cache.hidden.size() + 1 != layers ||
      static_cast<std::size_t>(cache.input.rows()) != params.in_dim()) {
    throw std::invalid_argument("backward: cache does not match network");
  }
  if (static_cast<std::size_t>(grad_out.rows()) != params.out_dim() || grad_out.cols() != batch) {
    throw std::invalid_argument("backward: output gradient does not match cached batch");
  }
  for (std::size_t l = 0; l < cache.hidden.size(); ++l) {
    const Matrix& h = cache.hidden[l];
    if (h.cols() != batch || static_cast<std::size_t>(h.rows()) != params.layer_sizes()[l + 1]) {
      throw std::invalid_argument("backward: cache does not match network");
    }
  }

  Gradients grads = params.zeros_like();
  Matrix g = grad_out;
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& input = (l == 0) ? cache.input : cache.hidden[l - 1];
    grads.weight(l).noalias() = g * input.transpose();
    grads.bias(l) = g.rowwise().sum();
    if (l > 0) {
      Matrix upstream = params.weight(l).transpose() * g;
      g = (input.array() > 0.0).select(upstream, 0.0);
    }
  }
  return grads;
}

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void check_head_shapes(const Eigen::Ref<const Matrix>& mean, const Eigen::Ref<const Vector>& log_std,
                       const Eigen::Ref<const Matrix>& action) {
  if (mean.rows() != log_std.size() || action.rows() != mean.rows() ||
      action.cols() != mean.cols()) {
    throw std::invalid_argument("gaussian head: shape mismatch");
  }
}

}  // namespace

GaussianEval gaussian_head(const Eigen::Ref<const Matrix>& mean, const Eigen::Ref<const Vector>& log_std,
                           const Eigen::Ref<const Matrix>& action) {
  check_head_shapes(mean, log_std, action);
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const double log_std_sum = log_std.sum();
  const auto dims = static_cast<double>(log_std.size());

  GaussianEval out;
  const Eigen::ArrayXXd z = (action - mean).array().colwise() * inv_std;
  out.log_prob = -0.5 * (z.square().colwise().sum().transpose() +
                         Eigen::ArrayXd::Constant(mean.cols(), 2.0 * log_std_sum + dims * kLog2Pi))
                            .matrix();
  out.entropy = Vector::Constant(mean.cols(), log_std_sum + dims * 0.5 * (1.0 + kLog2Pi));
  return out;
}

Matrix gaussian_log_prob_grad_mean(const Eigen::Ref<const Matrix>& mean,
                                   const Eigen::Ref<const Vector>& log_std,
                                   const Eigen::Ref<const Matrix>& action) {
  check_head_shapes(mean, log_std, action);
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  return ((action - mean).array().colwise() * inv_var).matrix();
}

Matrix gaussian_log_prob_grad_log_std(const Eigen::Ref<const Matrix>& mean,
                                      const Eigen::Ref<const Vector>& log_std,
                                      const Eigen::Ref<const Matrix>& action) {
  check_head_shapes(mean, log_std, action);
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const Eigen::ArrayXXd z = (action - mean).array().colwise() * inv_std;
  return (z.square() - 1.0).matrix();
}

Matrix sample_action(const Eigen::Ref<const Matrix>& mean, const Eigen::Ref<const Vector>& log_std,
                     RandomSource& rng) {
  if (mean.rows() != log_std.size()) throw std::invalid_argument("sample_action: shape mismatch");
  Matrix out(mean.rows(), mean.cols());
  for (Eigen::Index b = 0; b < mean.cols(); ++b) {
    for (Eigen::Index i = 0; i < mean.rows(); ++i) {
      out(i, b) = mean(i, b) + std::exp(log_std(i)) * rng.gaussian();
    }
  }
  return out;
}

AdamState make_adam_state(const MlpParams& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.first_moment.assign(params.size(), 0.0);
  s.second_moment.assign(params.size(), 0.0);
  return s;
}

void adam_update(MlpParams& params, const Gradients& grads, AdamState& state) {
  if (!params.same_layout(grads) || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_update: shape mismatch");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  auto theta = params.values();
  auto g = grads.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g[i];
    v = c.beta2 * v + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

void clamp_log_std(MlpParams& params) {
  auto ls = params.log_std();
  ls = ls.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

}  // namespace quadnav
