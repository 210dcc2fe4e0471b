#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tailhedge/errors.hpp"
#include "tailhedge/rng.hpp"

namespace tailhedge {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double swish(double x) { return x * sigmoid(x); }

inline double swish_derivative(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

/// Minimal row-major matrix; one sample per row.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class OutputHead { linear, sigmoid, negated_sigmoid };

/// Fully connected network: hidden layers use the swish activation followed
/// by batch normalization; the output layer applies the configured head.
/// Train-mode forward normalizes with batch statistics (population variance)
/// and folds them into the running estimates; eval-mode forward uses the
/// running estimates only.
class DenseNet {
 public:
  struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
    std::vector<std::vector<double>> scale;
    std::vector<std::vector<double>> shift;

    void zero() {
      for (auto& w : weight) std::fill(w.data.begin(), w.data.end(), 0.0);
      for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
      for (auto& s : scale) std::fill(s.begin(), s.end(), 0.0);
      for (auto& s : shift) std::fill(s.begin(), s.end(), 0.0);
    }

    double squared_norm() const {
      double out = 0.0;
      for (const auto& w : weight)
        for (double v : w.data) out += v * v;
      for (const auto& b : bias)
        for (double v : b) out += v * v;
      for (const auto& s : scale)
        for (double v : s) out += v * v;
      for (const auto& s : shift)
        for (double v : s) out += v * v;
      return out;
    }
  };

  struct ForwardCache {
    bool train = false;
    Matrix input;
    std::vector<Matrix> pre_activation;   // z per layer
    std::vector<Matrix> activation;       // swish(z) per hidden layer
    std::vector<Matrix> normalized;       // xhat per hidden layer
    std::vector<Matrix> norm_out;         // batch-norm output per hidden layer
    std::vector<std::vector<double>> batch_mean;
    std::vector<std::vector<double>> batch_var;
    Matrix output;
  };

  DenseNet() = default;
  DenseNet(std::vector<std::size_t> sizes, OutputHead head) : sizes_(std::move(sizes)), head_(head) {
    if (sizes_.size() < 2) throw InvalidInput("DenseNet: need at least input and output sizes");
    const std::size_t n_layers = sizes_.size() - 1;
    weights_.reserve(n_layers);
    biases_.reserve(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
      weights_.emplace_back(sizes_[l + 1], sizes_[l]);
      biases_.emplace_back(sizes_[l + 1], 0.0);
    }
    const std::size_t n_hidden = n_layers - 1;
    bn_scale_.assign(n_hidden, {});
    bn_shift_.assign(n_hidden, {});
    bn_running_mean_.assign(n_hidden, {});
    bn_running_var_.assign(n_hidden, {});
    for (std::size_t l = 0; l < n_hidden; ++l) {
      bn_scale_[l].assign(sizes_[l + 1], 1.0);
      bn_shift_[l].assign(sizes_[l + 1], 0.0);
      bn_running_mean_[l].assign(sizes_[l + 1], 0.0);
      bn_running_var_[l].assign(sizes_[l + 1], 1.0);
    }
  }

  /// Scaled-uniform fan-in initialization of weights and biases.
  void init(Rng& rng) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      for (auto& w : weights_[l].data) w = rng.uniform(-bound, bound);
      for (auto& b : biases_[l]) b = rng.uniform(-bound, bound);
    }
  }

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t n_layers() const { return weights_.size(); }
  std::size_t n_hidden() const { return weights_.size() - 1; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  OutputHead head() const { return head_; }

  Gradients make_gradients() const {
    Gradients g;
    for (const auto& w : weights_) g.weight.emplace_back(w.rows, w.cols);
    for (const auto& b : biases_) g.bias.emplace_back(b.size(), 0.0);
    for (const auto& s : bn_scale_) g.scale.emplace_back(s.size(), 0.0);
    for (const auto& s : bn_shift_) g.shift.emplace_back(s.size(), 0.0);
    return g;
  }

  Matrix forward(const Matrix& input, bool train, ForwardCache* cache = nullptr) {
    if (input.cols != input_dim()) throw InvalidInput("DenseNet: input dimension mismatch");
    if (cache) {
      cache->train = train;
      cache->input = input;
      cache->pre_activation.clear();
      cache->activation.clear();
      cache->normalized.clear();
      cache->norm_out.clear();
      cache->batch_mean.clear();
      cache->batch_var.clear();
    }
    Matrix x = input;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Matrix z = affine(l, x);
      if (cache) cache->pre_activation.push_back(z);
      if (l + 1 == n_layers()) {
        apply_head(z);
        if (cache) cache->output = z;
        return z;
      }
      Matrix a(z.rows, z.cols);
      for (std::size_t i = 0; i < z.data.size(); ++i) a.data[i] = swish(z.data[i]);
      if (cache) cache->activation.push_back(a);
      x = batch_norm(l, a, train, cache);
    }
    return x;  // unreachable
  }

  /// Backpropagation for a train-mode forward pass. d_output is dL/dy of the
  /// head output; gradients accumulate into grads.
  void backward(const ForwardCache& cache, const Matrix& d_output, Gradients& grads) const {
    if (!cache.train) throw InvalidInput("DenseNet: backward needs a train-mode cache");
    Matrix dy = d_output;
    // head
    {
      const Matrix& y = cache.output;
      if (head_ == OutputHead::sigmoid) {
        for (std::size_t i = 0; i < dy.data.size(); ++i) {
          dy.data[i] *= y.data[i] * (1.0 - y.data[i]);
        }
      } else if (head_ == OutputHead::negated_sigmoid) {
        // y = -sigmoid(z): dy/dz = y * (1 + y)
        for (std::size_t i = 0; i < dy.data.size(); ++i) {
          dy.data[i] *= y.data[i] * (1.0 + y.data[i]);
        }
      }
    }
    for (std::size_t l = n_layers(); l-- > 0;) {
      const Matrix& layer_in = l == 0 ? cache.input : cache_norm_out(cache, l - 1);
      // dy currently holds dL/dz of layer l
      accumulate_affine(l, layer_in, dy, grads);
      if (l == 0) break;
      Matrix dx = affine_backward_input(l, dy);
      // through batch norm of hidden layer l-1
      Matrix da = batch_norm_backward(l - 1, cache, dx, grads);
      // through swish
      const Matrix& z = cache.pre_activation[l - 1];
      dy = Matrix(da.rows, da.cols);
      for (std::size_t i = 0; i < da.data.size(); ++i) {
        dy.data[i] = da.data[i] * swish_derivative(z.data[i]);
      }
    }
  }

  /// In-place SGD step: params += coeff * grads (callers fold sign, learning
  /// rate and clipping into coeff).
  void apply_update(const Gradients& grads, double coeff) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (std::size_t i = 0; i < weights_[l].data.size(); ++i) {
        weights_[l].data[i] += coeff * grads.weight[l].data[i];
      }
      for (std::size_t i = 0; i < biases_[l].size(); ++i) {
        biases_[l][i] += coeff * grads.bias[l][i];
      }
    }
    for (std::size_t l = 0; l < bn_scale_.size(); ++l) {
      for (std::size_t i = 0; i < bn_scale_[l].size(); ++i) {
        bn_scale_[l][i] += coeff * grads.scale[l][i];
        bn_shift_[l][i] += coeff * grads.shift[l][i];
      }
    }
  }

  /// Trainable parameters as one flat vector (finite-difference tests,
  /// checkpoints). Order: per layer weight then bias, then per hidden layer
  /// scale then shift.
  std::vector<double> parameters() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.insert(out.end(), weights_[l].data.begin(), weights_[l].data.end());
      out.insert(out.end(), biases_[l].begin(), biases_[l].end());
    }
    for (std::size_t l = 0; l < bn_scale_.size(); ++l) {
      out.insert(out.end(), bn_scale_[l].begin(), bn_scale_[l].end());
      out.insert(out.end(), bn_shift_[l].begin(), bn_shift_[l].end());
    }
    return out;
  }

  void set_parameters(std::span<const double> flat) {
    std::size_t k = 0;
    auto take = [&](auto& dst) {
      for (auto& v : dst) v = flat[k++];
    };
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      take(weights_[l].data);
      take(biases_[l]);
    }
    for (std::size_t l = 0; l < bn_scale_.size(); ++l) {
      take(bn_scale_[l]);
      take(bn_shift_[l]);
    }
    if (k != flat.size()) throw InvalidInput("DenseNet: parameter vector size mismatch");
  }

  static std::vector<double> gradient_vector(const Gradients& g) {
    std::vector<double> out;
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
      out.insert(out.end(), g.weight[l].data.begin(), g.weight[l].data.end());
      out.insert(out.end(), g.bias[l].begin(), g.bias[l].end());
    }
    for (std::size_t l = 0; l < g.scale.size(); ++l) {
      out.insert(out.end(), g.scale[l].begin(), g.scale[l].end());
      out.insert(out.end(), g.shift[l].begin(), g.shift[l].end());
    }
    return out;
  }

  // running-statistics access (checkpoints)
  const std::vector<std::vector<double>>& running_mean() const { return bn_running_mean_; }
  const std::vector<std::vector<double>>& running_var() const { return bn_running_var_; }
  std::vector<std::vector<double>>& running_mean() { return bn_running_mean_; }
  std::vector<std::vector<double>>& running_var() { return bn_running_var_; }

 private:
  Matrix affine(std::size_t l, const Matrix& x) const {
    const Matrix& w = weights_[l];
    Matrix z(x.rows, w.rows);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t o = 0; o < w.rows; ++o) {
        double acc = biases_[l][o];
        for (std::size_t c = 0; c < w.cols; ++c) acc += w.at(o, c) * x.at(r, c);
        z.at(r, o) = acc;
      }
    }
    return z;
  }

  Matrix affine_backward_input(std::size_t l, const Matrix& dz) const {
    const Matrix& w = weights_[l];
    Matrix dx(dz.rows, w.cols);
    for (std::size_t r = 0; r < dz.rows; ++r) {
      for (std::size_t c = 0; c < w.cols; ++c) {
        double acc = 0.0;
        for (std::size_t o = 0; o < w.rows; ++o) acc += w.at(o, c) * dz.at(r, o);
        dx.at(r, c) = acc;
      }
    }
    return dx;
  }

  void accumulate_affine(std::size_t l, const Matrix& x, const Matrix& dz,
                         Gradients& grads) const {
    for (std::size_t o = 0; o < weights_[l].rows; ++o) {
      for (std::size_t r = 0; r < x.rows; ++r) {
        const double d = dz.at(r, o);
        grads.bias[l][o] += d;
        for (std::size_t c = 0; c < weights_[l].cols; ++c) {
          grads.weight[l].at(o, c) += d * x.at(r, c);
        }
      }
    }
  }

  void apply_head(Matrix& z) const {
    switch (head_) {
      case OutputHead::linear:
        return;
      case OutputHead::sigmoid:
        for (auto& v : z.data) v = sigmoid(v);
        return;
      case OutputHead::negated_sigmoid:
        for (auto& v : z.data) v = -sigmoid(v);
        return;
    }
  }

  Matrix batch_norm(std::size_t l, const Matrix& a, bool train, ForwardCache* cache) {
    const std::size_t m = a.rows;
    const std::size_t width = a.cols;
    std::vector<double> mean(width, 0.0), var(width, 0.0);
    if (train) {
      for (std::size_t c = 0; c < width; ++c) {
        double mu = 0.0;
        for (std::size_t r = 0; r < m; ++r) mu += a.at(r, c);
        mu /= static_cast<double>(m);
        double v = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          const double d = a.at(r, c) - mu;
          v += d * d;
        }
        v /= static_cast<double>(m);
        mean[c] = mu;
        var[c] = v;
        bn_running_mean_[l][c] = (1.0 - bn_momentum_) * bn_running_mean_[l][c] + bn_momentum_ * mu;
        bn_running_var_[l][c] = (1.0 - bn_momentum_) * bn_running_var_[l][c] + bn_momentum_ * v;
      }
    } else {
      mean = bn_running_mean_[l];
      var = bn_running_var_[l];
    }
    Matrix xhat(m, width);
    Matrix y(m, width);
    for (std::size_t c = 0; c < width; ++c) {
      const double inv_sd = 1.0 / std::sqrt(var[c] + bn_eps_);
      for (std::size_t r = 0; r < m; ++r) {
        const double h = (a.at(r, c) - mean[c]) * inv_sd;
        xhat.at(r, c) = h;
        y.at(r, c) = bn_scale_[l][c] * h + bn_shift_[l][c];
      }
    }
    if (cache) {
      cache->normalized.push_back(xhat);
      cache->batch_mean.push_back(mean);
      cache->batch_var.push_back(var);
      cache->norm_out.push_back(y);
    }
    return y;
  }

  static const Matrix& cache_norm_out(const ForwardCache& cache, std::size_t hidden_l) {
    return cache.norm_out[hidden_l];
  }

  Matrix batch_norm_backward(std::size_t l, const ForwardCache& cache, const Matrix& dy,
                             Gradients& grads) const {
    const Matrix& xhat = cache.normalized[l];
    const auto& var = cache.batch_var[l];
    const std::size_t m = dy.rows;
    const std::size_t width = dy.cols;
    Matrix da(m, width);
    for (std::size_t c = 0; c < width; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        sum_dy += dy.at(r, c);
        sum_dy_xhat += dy.at(r, c) * xhat.at(r, c);
      }
      grads.shift[l][c] += sum_dy;
      grads.scale[l][c] += sum_dy_xhat;
      const double inv_sd = 1.0 / std::sqrt(var[c] + bn_eps_);
      const double g = bn_scale_[l][c];
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t r = 0; r < m; ++r) {
        da.at(r, c) =
            g * inv_sd * (dy.at(r, c) - inv_m * sum_dy - xhat.at(r, c) * inv_m * sum_dy_xhat);
      }
    }
    return da;
  }

  std::vector<std::size_t> sizes_;
  OutputHead head_ = OutputHead::linear;
  std::vector<Matrix> weights_;
  std::vector<std::vector<double>> biases_;
  std::vector<std::vector<double>> bn_scale_;
  std::vector<std::vector<double>> bn_shift_;
  std::vector<std::vector<double>> bn_running_mean_;
  std::vector<std::vector<double>> bn_running_var_;
  double bn_momentum_ = 0.1;
  double bn_eps_ = 1e-5;
};

}  // namespace tailhedge
