// Copyright 2026 The dtgspl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dtgspl/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "dtgspl/rng.hpp"

namespace dtgspl::nn {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

size_t ParamStore::add(const std::string& name, int rows, int cols, Init init,
                       double scale) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  Tensor t;
  t.name = name;
  t.grad = Mat::Zero(rows, cols);
  switch (init) {
    case Init::Zero:
      t.value = Mat::Zero(rows, cols);
      break;
    case Init::One:
      t.value = Mat::Ones(rows, cols);
      break;
    case Init::Gaussian: {
      Rng rng(Rng::derive(seed_, "init:" + name));
      t.value.resize(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) t.value(r, c) = scale * rng.normal();
      }
      break;
    }
  }
  items_.push_back(std::move(t));
  index_[name] = items_.size() - 1;
  return items_.size() - 1;
}

size_t ParamStore::ensure(const std::string& name, int rows, int cols, Init init,
                          double scale) {
  const auto it = index_.find(name);
  if (it == index_.end()) return add(name, rows, cols, init, scale);
  const Tensor& t = items_[it->second];
  if (t.value.rows() != rows || t.value.cols() != cols) {
    throw std::runtime_error("parameter shape mismatch for " + name);
  }
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter " + name);
  return items_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter " + name);
  return items_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& t : items_) t.grad.setZero();
}

void ParamStore::scale_grad(double s) {
  for (auto& t : items_) t.grad *= s;
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& t : items_) {
    std::vector<double> data(t.value.data(), t.value.data() + t.value.size());
    params.push_back({{"name", t.name},
                      {"rows", t.value.rows()},
                      {"cols", t.value.cols()},
                      {"data", data}});
  }
  return {{"seed", seed_}, {"params", params}};
}

ParamStore ParamStore::from_json(const nlohmann::json& j) {
  ParamStore ps(j.at("seed").get<uint64_t>());
  for (const auto& p : j.at("params")) {
    const int rows = p.at("rows").get<int>();
    const int cols = p.at("cols").get<int>();
    const auto data = p.at("data").get<std::vector<double>>();
    if (static_cast<int>(data.size()) != rows * cols) {
      throw std::runtime_error("checkpoint tensor size mismatch for " +
                               p.at("name").get<std::string>());
    }
    const size_t i = ps.add(p.at("name").get<std::string>(), rows, cols, Init::Zero);
    ps.at(i).value = Eigen::Map<const Mat>(data.data(), rows, cols);
  }
  return ps;
}

Mat affine(const Tensor& w, const Tensor& b, const Mat& x, AffineCache* cache) {
  if (x.cols() != w.value.rows() || w.value.cols() != b.value.cols() ||
      b.value.rows() != 1) {
    throw std::invalid_argument("affine: shape mismatch at " + w.name);
  }
  if (cache) cache->x = x;
  return (x * w.value).rowwise() + b.value.row(0);
}

Mat affine_backward(Tensor& w, Tensor& b, const AffineCache& cache, const Mat& dy) {
  w.grad += cache.x.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
  return dy * w.value.transpose();
}

Mat sigmoid(const Mat& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Mat sigmoid_backward(const Mat& y, const Mat& dy) {
  return dy.array() * y.array() * (1.0 - y.array());
}

Mat tanh_fwd(const Mat& x) { return x.array().tanh(); }

Mat tanh_backward(const Mat& y, const Mat& dy) {
  return dy.array() * (1.0 - y.array().square());
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_backward(const Mat& y, const Mat& dy) {
  return (y.array() > 0.0).cast<double>() * dy.array();
}

Mat softmax_rows(const Mat& x) {
  Mat p(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp();
    p.row(r) = e / e.sum();
  }
  return p;
}

Mat softmax_rows_backward(const Mat& p, const Mat& dp) {
  Mat dx(p.rows(), p.cols());
  for (int r = 0; r < p.rows(); ++r) {
    const double dot = p.row(r).dot(dp.row(r));
    dx.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
  }
  return dx;
}

Mat layer_norm(const Tensor& gamma, const Tensor& beta, const Mat& x,
               LayerNormCache* cache) {
  using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
  const int d = static_cast<int>(x.cols());
  Mat xhat(x.rows(), d);
  Vec inv_std(x.rows());
  Mat y(x.rows(), d);
  const RowArray g = gamma.value.row(0).array();
  const RowArray off = beta.value.row(0).array();
  for (int r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * is;
    inv_std(r) = is;
    y.row(r) = xhat.row(r).array() * g + off;
  }
  if (cache) {
    cache->xhat = xhat;
    cache->inv_std = inv_std;
  }
  return y;
}

Mat layer_norm_backward(Tensor& gamma, Tensor& beta, const LayerNormCache& cache,
                        const Mat& dy) {
  using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
  const Mat& xhat = cache.xhat;
  gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  const RowArray g = gamma.value.row(0).array();
  Mat dx(xhat.rows(), xhat.cols());
  for (int r = 0; r < xhat.rows(); ++r) {
    const RowArray dxhat = dy.row(r).array() * g;
    const RowArray xh = xhat.row(r).array();
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = (dxhat * xh).mean();
    dx.row(r) = cache.inv_std(r) * (dxhat - mean_dxhat - xh * mean_dxhat_xhat);
  }
  return dx;
}

AttentionOut attention(const Mat& queries, const Mat& keys, const Mat& values,
                       AttentionCache* cache) {
  if (keys.rows() == 0) throw std::invalid_argument("attention: empty key set");
  if (queries.cols() != keys.cols() || keys.rows() != values.rows()) {
    throw std::invalid_argument("attention: shape mismatch");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  const Mat scores = queries * keys.transpose() * scale;
  AttentionOut out;
  out.coeffs = softmax_rows(scores);
  out.output = out.coeffs * values;
  if (cache) {
    cache->q = queries;
    cache->k = keys;
    cache->v = values;
    cache->coeffs = out.coeffs;
  }
  return out;
}

void attention_backward(const AttentionCache& cache, const Mat& d_out,
                        const Mat& d_coeffs, Mat& d_queries, Mat& d_keys,
                        Mat& d_values) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(cache.q.cols()));
  d_values = cache.coeffs.transpose() * d_out;
  Mat da = d_out * cache.v.transpose();
  if (d_coeffs.size() > 0) da += d_coeffs;
  const Mat ds = softmax_rows_backward(cache.coeffs, da);
  d_queries = ds * cache.k * scale;
  d_keys = ds.transpose() * cache.q * scale;
}

namespace {

void check_finite_grad(const Tensor& t) {
  if (!t.grad.allFinite()) {
    throw std::runtime_error("non-finite gradient in parameter " + t.name);
  }
}

}  // namespace

void Sgd::step(ParamStore& ps) {
  for (size_t i = 0; i < ps.size(); ++i) {
    Tensor& t = ps.at(i);
    check_finite_grad(t);
    t.value -= lr_ * t.grad;
    t.grad.setZero();
  }
}

void Adam::step(ParamStore& ps) {
  if (m_.empty()) {
    m_.resize(ps.size());
    v_.resize(ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
      m_[i] = Mat::Zero(ps.at(i).value.rows(), ps.at(i).value.cols());
      v_[i] = m_[i];
    }
  }
  if (m_.size() != ps.size()) {
    throw std::runtime_error("Adam: parameter count changed after first step");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < ps.size(); ++i) {
    Tensor& t = ps.at(i);
    check_finite_grad(t);
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * t.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * t.grad.cwiseProduct(t.grad);
    t.value.array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    t.grad.setZero();
  }
}

namespace {

double rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

double grad_check(ParamStore& ps, const std::function<double()>& loss, double eps,
                  int max_coords_per_tensor) {
  double worst = 0.0;
  for (size_t i = 0; i < ps.size(); ++i) {
    Tensor& t = ps.at(i);
    const Eigen::Index total = t.value.size();
    Eigen::Index stride = 1;
    if (max_coords_per_tensor > 0 && total > max_coords_per_tensor) {
      stride = total / max_coords_per_tensor;
    }
    for (Eigen::Index c = 0; c < total; c += stride) {
      double* coord = t.value.data() + c;
      const double saved = *coord;
      *coord = saved + eps;
      const double lp = loss();
      *coord = saved - eps;
      const double lm = loss();
      *coord = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw std::runtime_error("grad_check: non-finite loss at " + t.name);
      }
      worst = std::max(worst, rel_err(t.grad.data()[c], (lp - lm) / (2.0 * eps)));
    }
  }
  return worst;
}

double grad_check_input(Mat& x, const Mat& analytic,
                        const std::function<double()>& loss, double eps) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double saved = x.data()[c];
    x.data()[c] = saved + eps;
    const double lp = loss();
    x.data()[c] = saved - eps;
    const double lm = loss();
    x.data()[c] = saved;
    if (!std::isfinite(lp) || !std::isfinite(lm)) {
      throw std::runtime_error("grad_check_input: non-finite loss");
    }
    worst = std::max(worst, rel_err(analytic.data()[c], (lp - lm) / (2.0 * eps)));
  }
  return worst;
}

}  // namespace dtgspl::nn
