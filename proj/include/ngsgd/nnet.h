// ngsgd/nnet.h

// Copyright 2026 The ngsgd Authors
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

#ifndef NGSGD_NNET_H_
#define NGSGD_NNET_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ngsgd/matrix.h"

namespace ngsgd {

enum class NonlinearityType : std::uint32_t {
  kRelu = 0,
  kPnorm = 1,
  kSoftmax = 2,
  kIdentity = 3,
};

struct Nonlinearity {
  NonlinearityType type = NonlinearityType::kRelu;
  double p = 2.0;  // p-norm only
  int group = 1;   // p-norm only: inputs per output

  static Nonlinearity Relu() { return {}; }
  static Nonlinearity Pnorm(double p, int group) {
    return {NonlinearityType::kPnorm, p, group};
  }
  static Nonlinearity Softmax() { return {NonlinearityType::kSoftmax, 2.0, 1}; }
  static Nonlinearity Identity() {
    return {NonlinearityType::kIdentity, 2.0, 1};
  }
  /// Parses "relu", "identity", "softmax" or "pnorm".
  static Nonlinearity Parse(const std::string &name, double p = 2.0,
                            int group = 2);
  std::string Name() const;

  friend bool operator==(const Nonlinearity &, const Nonlinearity &) = default;
};

/// One affine transform followed by a nonlinearity.  The bias is the last
/// column of `weights`, so weights is (linear output dim) x (input dim + 1).
template <typename Real>
struct Layer {
  Matrix<Real> weights;
  Nonlinearity nonlinearity;

  Index input_dim() const { return weights.cols() - 1; }
  Index linear_dim() const { return weights.rows(); }
  /// Dimension after the nonlinearity (p-norm divides by the group size).
  Index output_dim() const;
};

template <typename Real>
struct Network {
  std::vector<Layer<Real>> layers;
  Index input_dim = 0;
  Index num_classes = 0;

  /// Throws if dimensions do not chain or softmax is not (only) last.
  void Check() const;
  Index num_hidden() const { return static_cast<Index>(layers.size()) - 1; }

  template <typename Other>
  static Network Cast(const Network<Other> &net) {
    Network out;
    out.input_dim = net.input_dim;
    out.num_classes = net.num_classes;
    for (const auto &l : net.layers)
      out.layers.push_back({Matrix<Real>::Cast(l.weights), l.nonlinearity});
    return out;
  }

  friend bool operator==(const Network &a, const Network &b) {
    if (a.input_dim != b.input_dim || a.num_classes != b.num_classes ||
        a.layers.size() != b.layers.size())
      return false;
    for (std::size_t i = 0; i < a.layers.size(); i++)
      if (!(a.layers[i].weights == b.layers[i].weights) ||
          !(a.layers[i].nonlinearity == b.layers[i].nonlinearity))
        return false;
    return true;
  }
};

/// Activations kept from the forward pass.
template <typename Real>
struct ForwardState {
  std::vector<Matrix<Real>> y_in;    // per layer, input with a 1 appended
  std::vector<Matrix<Real>> linear;  // per layer, y_in W^T
  Matrix<Real> log_probs;            // N x num_classes
};

/// Per weight matrix: y_in (N x (D_in + 1)) and the derivative of the
/// objective w.r.t. the matrix output, x_deriv (N x D_out).  The raw
/// gradient of the objective w.r.t. W_i is x_deriv^T y_in.
template <typename Real>
struct BackpropBundle {
  std::vector<Matrix<Real>> y_in;
  std::vector<Matrix<Real>> x_deriv;
  double objective = 0;  // sum over the minibatch of log p(y | x)
};

/// dims = {input, hidden..., classes}.  Hidden weights (bias column included)
/// are N(0, 1/fan_in) with fan_in = D_in + 1; the softmax layer is zero.
template <typename Real>
Network<Real> InitNetwork(const std::vector<Index> &dims,
                          const Nonlinearity &hidden, std::uint64_t seed);

template <typename Real>
ForwardState<Real> Forward(const Network<Real> &net, const Matrix<Real> &x);

/// Consumes the forward state (its y_in matrices move into the bundle).
template <typename Real>
BackpropBundle<Real> Backprop(const Network<Real> &net,
                              ForwardState<Real> fwd,
                              std::span<const std::int32_t> labels);

/// Sum over rows of log p(label | x).
template <typename Real>
double Objective(const Network<Real> &net, const Matrix<Real> &x,
                 std::span<const std::int32_t> labels);

/// Fraction of rows whose argmax class equals the label.
template <typename Real>
double Accuracy(const Network<Real> &net, const Matrix<Real> &x,
                std::span<const std::int32_t> labels);

/// Drops the softmax layer, appends a freshly initialized hidden layer of
/// `new_dim` outputs (same nonlinearity as the existing hidden layers, or
/// `fallback` if there are none) and a new zero softmax layer.
template <typename Real>
Network<Real> AddHiddenLayer(const Network<Real> &net, Index new_dim,
                             std::uint64_t seed,
                             const Nonlinearity &fallback = Nonlinearity());

/// Versioned binary model file:
///   "NGNN", u32 version (1), u32 num_layers, u32 input_dim, u32 num_classes,
///   per layer { u32 rows, u32 cols, u32 nonlinearity, f32 p, u32 group },
///   then per layer rows*cols f32 weights, row-major.  Little-endian.
template <typename Real>
void WriteNetwork(std::ostream &os, const Network<Real> &net);
template <typename Real>
Network<Real> ReadNetwork(std::istream &is);
template <typename Real>
void WriteNetworkFile(const std::string &path, const Network<Real> &net);
template <typename Real>
Network<Real> ReadNetworkFile(const std::string &path);

}  // namespace ngsgd

#endif  // NGSGD_NNET_H_
