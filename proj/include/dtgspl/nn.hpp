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

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace dtgspl::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Init { Zero, One, Gaussian };

// A named parameter with its same-shape gradient buffer.
struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
};

// Flat registry of trainable tensors. Initialization is derived from the
// store seed and the tensor name, so two stores that register a tensor under
// the same name start from identical values regardless of registration order.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  size_t add(const std::string& name, int rows, int cols, Init init,
             double scale = 1.0);

  // Like add, but reuses an existing tensor of the same name (shape checked),
  // so models can attach to a store restored from a checkpoint.
  size_t ensure(const std::string& name, int rows, int cols, Init init,
                double scale = 1.0);

  Tensor& at(size_t i) { return items_[i]; }
  const Tensor& at(size_t i) const { return items_[i]; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  size_t size() const { return items_.size(); }
  uint64_t seed() const { return seed_; }

  void zero_grad();
  void scale_grad(double s);

  nlohmann::json to_json() const;
  static ParamStore from_json(const nlohmann::json& j);

 private:
  uint64_t seed_;
  std::vector<Tensor> items_;
  std::map<std::string, size_t> index_;
};

// ---- primitives ----
//
// Sequences are matrices with one row per position. Every forward op takes an
// optional cache that its backward consumes; backwards accumulate into the
// parameter grad buffers and return the gradient wrt their input.

struct AffineCache {
  Mat x;
};

// y = x * W + b, with W (in x out) and b (1 x out).
Mat affine(const Tensor& w, const Tensor& b, const Mat& x,
           AffineCache* cache = nullptr);
Mat affine_backward(Tensor& w, Tensor& b, const AffineCache& cache,
                    const Mat& dy);

Mat sigmoid(const Mat& x);
Mat sigmoid_backward(const Mat& y, const Mat& dy);

Mat tanh_fwd(const Mat& x);
Mat tanh_backward(const Mat& y, const Mat& dy);

Mat relu(const Mat& x);
Mat relu_backward(const Mat& y, const Mat& dy);

// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& x);
Mat softmax_rows_backward(const Mat& p, const Mat& dp);

struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

// Per-row normalization with learned gain/offset (1 x d each).
Mat layer_norm(const Tensor& gamma, const Tensor& beta, const Mat& x,
               LayerNormCache* cache = nullptr);
Mat layer_norm_backward(Tensor& gamma, Tensor& beta, const LayerNormCache& cache,
                        const Mat& dy);

struct AttentionOut {
  Mat output;  // nq x dv
  Mat coeffs;  // nq x nk, rows sum to 1
};

struct AttentionCache {
  Mat q, k, v, coeffs;
};

// Scaled dot-product attention softmax(Q K^T / sqrt(d)) V on already
// projected inputs. Throws on an empty key set.
AttentionOut attention(const Mat& queries, const Mat& keys, const Mat& values,
                       AttentionCache* cache = nullptr);

// d_coeffs lets callers inject a loss gradient on the attention matrix
// itself (attention supervision) alongside the output-path gradient.
void attention_backward(const AttentionCache& cache, const Mat& d_out,
                        const Mat& d_coeffs, Mat& d_queries, Mat& d_keys,
                        Mat& d_values);

// ---- optimizers ----
//
// Both update in place and zero the gradients; a non-finite gradient aborts
// with the offending tensor's name.

class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(ParamStore& ps);

 private:
  double lr_;
};

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& ps);

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

// ---- gradient checking ----
//
// Central differences against the grads already accumulated in the store.
// Relative error is |analytic - numeric| / max(1, |analytic|, |numeric|).
// loss must be a deterministic pure forward pass.
double grad_check(ParamStore& ps, const std::function<double()>& loss,
                  double eps = 1e-5, int max_coords_per_tensor = -1);

// Same check for a gradient wrt a raw input matrix.
double grad_check_input(Mat& x, const Mat& analytic,
                        const std::function<double()>& loss, double eps = 1e-5);

}  // namespace dtgspl::nn
