// ngsgd/nnet.cc

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

#include "ngsgd/nnet.h"

#include <cmath>
#include <fstream>
#include <random>

#include "ngsgd/binary-io.h"
#include "ngsgd/kernels.h"

namespace ngsgd {

namespace {

constexpr char kModelMagic[5] = "NGNN";
constexpr std::uint32_t kModelVersion = 1;

template <typename Real>
Matrix<Real> AppendOnes(const Matrix<Real> &x) {
  Matrix<Real> out(x.rows(), x.cols() + 1);
  for (Index i = 0; i < x.rows(); i++) {
    auto src = x.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst[x.cols()] = Real(1);
  }
  return out;
}

template <typename Real>
Matrix<Real> RandomWeights(Index rows, Index cols, std::mt19937_64 *rng) {
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(double(cols)));
  Matrix<Real> w(rows, cols);
  for (Real &v : w.values()) v = Real(gauss(*rng));
  return w;
}

Index LinearDimFor(Index out_dim, const Nonlinearity &nl) {
  return nl.type == NonlinearityType::kPnorm ? out_dim * nl.group : out_dim;
}

// Applies the nonlinearity of `layer` to its linear output.
template <typename Real>
Matrix<Real> Activate(const Nonlinearity &nl, const Matrix<Real> &z) {
  const Index n = z.rows();
  switch (nl.type) {
    case NonlinearityType::kRelu: {
      Matrix<Real> out = z;
      for (Real &v : out.values()) v = v > Real(0) ? v : Real(0);
      return out;
    }
    case NonlinearityType::kIdentity:
      return z;
    case NonlinearityType::kPnorm: {
      const Index g = nl.group, k = z.cols() / g;
      Matrix<Real> out(n, k);
      for (Index i = 0; i < n; i++) {
        for (Index o = 0; o < k; o++) {
          double s = 0;
          for (Index q = 0; q < g; q++) {
            double v = std::abs(double(z(i, o * g + q)));
            s += nl.p == 2.0 ? v * v : std::pow(v, nl.p);
          }
          out(i, o) = Real(nl.p == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / nl.p));
        }
      }
      return out;
    }
    case NonlinearityType::kSoftmax: {
      // Log-softmax, with the row max subtracted.
      Matrix<Real> out(n, z.cols());
      for (Index i = 0; i < n; i++) {
        auto zr = z.row(i);
        double mx = *std::max_element(zr.begin(), zr.end());
        double s = 0;
        for (Real v : zr) s += std::exp(double(v) - mx);
        double lse = mx + std::log(s);
        for (Index j = 0; j < z.cols(); j++) out(i, j) = Real(double(zr[j]) - lse);
      }
      return out;
    }
  }
  throw Error("unknown nonlinearity");
}

// Given d(objective)/d(output of the nonlinearity), returns
// d(objective)/d(linear output).
template <typename Real>
Matrix<Real> BackpropNonlinearity(const Nonlinearity &nl,
                                  const Matrix<Real> &z,
                                  const Matrix<Real> &out_deriv) {
  const Index n = z.rows();
  switch (nl.type) {
    case NonlinearityType::kRelu: {
      Matrix<Real> d = out_deriv;
      for (Index i = 0; i < d.size(); i++)
        if (!(z.data()[i] > Real(0))) d.data()[i] = 0;
      return d;
    }
    case NonlinearityType::kIdentity:
      return out_deriv;
    case NonlinearityType::kPnorm: {
      const Index g = nl.group, k = out_deriv.cols();
      Matrix<Real> d(n, z.cols());
      for (Index i = 0; i < n; i++) {
        for (Index o = 0; o < k; o++) {
          double s = 0;
          for (Index q = 0; q < g; q++) {
            double v = std::abs(double(z(i, o * g + q)));
            s += std::pow(v, nl.p);
          }
          if (s == 0) continue;  // gradient at an all-zero group is 0
          const double y = std::pow(s, 1.0 / nl.p);
          const double yp = std::pow(y, nl.p - 1.0);
          for (Index q = 0; q < g; q++) {
            double v = double(z(i, o * g + q));
            double dydz = (v >= 0 ? 1.0 : -1.0) *
                          std::pow(std::abs(v), nl.p - 1.0) / yp;
            d(i, o * g + q) = Real(dydz * double(out_deriv(i, o)));
          }
        }
      }
      return d;
    }
    case NonlinearityType::kSoftmax:
      break;
  }
  throw Error("BackpropNonlinearity: softmax is only valid as the last layer");
}

}  // namespace

Nonlinearity Nonlinearity::Parse(const std::string &name, double p,
                                 int group) {
  if (name == "relu") return Relu();
  if (name == "pnorm") {
    if (group < 1 || !(p >= 1)) throw Error("p-norm needs p >= 1, group >= 1");
    return Pnorm(p, group);
  }
  if (name == "identity") return Identity();
  if (name == "softmax") return Softmax();
  throw Error("unknown nonlinearity '" + name + "'");
}

std::string Nonlinearity::Name() const {
  switch (type) {
    case NonlinearityType::kRelu: return "relu";
    case NonlinearityType::kPnorm: return "pnorm";
    case NonlinearityType::kSoftmax: return "softmax";
    case NonlinearityType::kIdentity: return "identity";
  }
  return "?";
}

template <typename Real>
Index Layer<Real>::output_dim() const {
  if (nonlinearity.type == NonlinearityType::kPnorm)
    return linear_dim() / nonlinearity.group;
  return linear_dim();
}

template <typename Real>
void Network<Real>::Check() const {
  if (layers.empty()) throw Error("Network: no layers");
  Index dim = input_dim;
  for (std::size_t i = 0; i < layers.size(); i++) {
    const Layer<Real> &l = layers[i];
    if (l.input_dim() != dim)
      throw Error("Network: layer " + std::to_string(i) + " expects input " +
                  std::to_string(l.input_dim()) + ", got " +
                  std::to_string(dim));
    const bool last = i + 1 == layers.size();
    if ((l.nonlinearity.type == NonlinearityType::kSoftmax) != last)
      throw Error("Network: softmax must be exactly the final layer");
    if (l.nonlinearity.type == NonlinearityType::kPnorm &&
        (l.nonlinearity.group < 1 ||
         l.linear_dim() % l.nonlinearity.group != 0))
      throw Error("Network: p-norm group does not divide layer dimension");
    dim = l.output_dim();
  }
  if (dim != num_classes) throw Error("Network: output dim != num_classes");
}

template <typename Real>
Network<Real> InitNetwork(const std::vector<Index> &dims,
                          const Nonlinearity &hidden, std::uint64_t seed) {
  if (dims.size() < 2)
    throw Error("InitNetwork: need at least input and output dims");
  for (Index d : dims)
    if (d < 1) throw Error("InitNetwork: dimensions must be positive");
  if (hidden.type == NonlinearityType::kSoftmax)
    throw Error("InitNetwork: softmax cannot be a hidden nonlinearity");
  std::mt19937_64 rng(seed);
  Network<Real> net;
  net.input_dim = dims.front();
  net.num_classes = dims.back();
  for (std::size_t i = 0; i + 2 < dims.size(); i++) {
    const Index fan_in = dims[i] + 1;
    net.layers.push_back(
        {RandomWeights<Real>(LinearDimFor(dims[i + 1], hidden), fan_in, &rng),
         hidden});
  }
  net.layers.push_back({Matrix<Real>(dims.back(), dims[dims.size() - 2] + 1),
                        Nonlinearity::Softmax()});
  net.Check();
  return net;
}

template <typename Real>
ForwardState<Real> Forward(const Network<Real> &net, const Matrix<Real> &x) {
  if (x.cols() != net.input_dim)
    throw Error("Forward: input has " + std::to_string(x.cols()) +
                " columns, network expects " + std::to_string(net.input_dim));
  ForwardState<Real> fwd;
  Matrix<Real> cur = x;
  for (const Layer<Real> &layer : net.layers) {
    fwd.y_in.push_back(AppendOnes(cur));
    Matrix<Real> z = kernels::MatMul(fwd.y_in.back(), Trans::kNo,
                                     layer.weights, Trans::kYes);
    cur = Activate(layer.nonlinearity, z);
    fwd.linear.push_back(std::move(z));
  }
  fwd.log_probs = std::move(cur);
  return fwd;
}

template <typename Real>
BackpropBundle<Real> Backprop(const Network<Real> &net, ForwardState<Real> fwd,
                              std::span<const std::int32_t> labels) {
  const Index n = fwd.log_probs.rows();
  if (static_cast<Index>(labels.size()) != n)
    throw Error("Backprop: label count does not match minibatch");
  const std::size_t num_layers = net.layers.size();
  if (fwd.y_in.size() != num_layers)
    throw Error("Backprop: forward state does not match network");

  BackpropBundle<Real> bundle;
  bundle.x_deriv.resize(num_layers);
  // d log p(y) / d logits = onehot(y) - softmax.
  Matrix<Real> deriv(n, net.num_classes);
  double objective = 0;
  for (Index i = 0; i < n; i++) {
    const std::int32_t y = labels[i];
    if (y < 0 || y >= net.num_classes)
      throw Error("Backprop: label " + std::to_string(y) + " out of range");
    objective += fwd.log_probs(i, y);
    for (Index c = 0; c < net.num_classes; c++)
      deriv(i, c) = Real((c == y ? 1.0 : 0.0) -
                         std::exp(double(fwd.log_probs(i, c))));
  }
  bundle.objective = objective;

  for (std::size_t li = num_layers; li-- > 0;) {
    const Layer<Real> &layer = net.layers[li];
    if (li + 1 < num_layers)
      deriv = BackpropNonlinearity(layer.nonlinearity, fwd.linear[li], deriv);
    if (li > 0) {
      // Derivative w.r.t. this layer's input; the bias column is dropped.
      Matrix<Real> full = kernels::MatMul(deriv, Trans::kNo, layer.weights,
                                          Trans::kNo);
      Matrix<Real> next(n, layer.input_dim());
      for (Index i = 0; i < n; i++) {
        auto src = full.row(i);
        std::copy(src.begin(), src.end() - 1, next.row(i).begin());
      }
      bundle.x_deriv[li] = std::move(deriv);
      deriv = std::move(next);
    } else {
      bundle.x_deriv[li] = std::move(deriv);
    }
  }
  bundle.y_in = std::move(fwd.y_in);
  return bundle;
}

template <typename Real>
double Objective(const Network<Real> &net, const Matrix<Real> &x,
                 std::span<const std::int32_t> labels) {
  ForwardState<Real> fwd = Forward(net, x);
  if (static_cast<Index>(labels.size()) != x.rows())
    throw Error("Objective: label count does not match rows");
  double obj = 0;
  for (Index i = 0; i < x.rows(); i++) {
    if (labels[i] < 0 || labels[i] >= net.num_classes)
      throw Error("Objective: label out of range");
    obj += fwd.log_probs(i, labels[i]);
  }
  return obj;
}

template <typename Real>
double Accuracy(const Network<Real> &net, const Matrix<Real> &x,
                std::span<const std::int32_t> labels) {
  ForwardState<Real> fwd = Forward(net, x);
  if (x.rows() == 0) return 0;
  Index correct = 0;
  for (Index i = 0; i < x.rows(); i++) {
    auto r = fwd.log_probs.row(i);
    Index best = std::max_element(r.begin(), r.end()) - r.begin();
    if (best == labels[i]) correct++;
  }
  return double(correct) / double(x.rows());
}

template <typename Real>
Network<Real> AddHiddenLayer(const Network<Real> &net, Index new_dim,
                             std::uint64_t seed, const Nonlinearity &fallback) {
  if (net.layers.empty()) throw Error("AddHiddenLayer: network has no layers");
  if (net.layers.back().nonlinearity.type != NonlinearityType::kSoftmax)
    throw Error("AddHiddenLayer: network has no final softmax layer");
  if (new_dim < 1) throw Error("AddHiddenLayer: new_dim must be positive");
  Network<Real> out = net;
  out.layers.pop_back();
  const Nonlinearity hidden =
      out.layers.empty() ? fallback : out.layers.back().nonlinearity;
  const Index in_dim =
      out.layers.empty() ? out.input_dim : out.layers.back().output_dim();
  std::mt19937_64 rng(seed);
  out.layers.push_back(
      {RandomWeights<Real>(LinearDimFor(new_dim, hidden), in_dim + 1, &rng),
       hidden});
  out.layers.push_back(
      {Matrix<Real>(out.num_classes, new_dim + 1), Nonlinearity::Softmax()});
  out.Check();
  return out;
}

template <typename Real>
void WriteNetwork(std::ostream &os, const Network<Real> &net) {
  net.Check();
  binary::WriteMagic(os, kModelMagic);
  binary::WriteU32(os, kModelVersion);
  binary::WriteU32(os, static_cast<std::uint32_t>(net.layers.size()));
  binary::WriteU32(os, static_cast<std::uint32_t>(net.input_dim));
  binary::WriteU32(os, static_cast<std::uint32_t>(net.num_classes));
  for (const Layer<Real> &l : net.layers) {
    binary::WriteU32(os, static_cast<std::uint32_t>(l.weights.rows()));
    binary::WriteU32(os, static_cast<std::uint32_t>(l.weights.cols()));
    binary::WriteU32(os, static_cast<std::uint32_t>(l.nonlinearity.type));
    binary::WriteF32(os, static_cast<float>(l.nonlinearity.p));
    binary::WriteU32(os, static_cast<std::uint32_t>(l.nonlinearity.group));
  }
  for (const Layer<Real> &l : net.layers)
    for (Real v : l.weights.values()) binary::WriteF32(os, static_cast<float>(v));
  if (!os) throw Error("WriteNetwork: write failed");
}

template <typename Real>
Network<Real> ReadNetwork(std::istream &is) {
  binary::ExpectMagic(is, kModelMagic, "model file");
  const std::uint32_t version = binary::ReadU32(is, "model version");
  if (version != kModelVersion)
    throw Error("model file: unsupported version " + std::to_string(version));
  const std::uint32_t num_layers = binary::ReadU32(is, "model header");
  if (num_layers == 0 || num_layers > 1000)
    throw Error("model file: implausible layer count");
  Network<Real> net;
  net.input_dim = binary::ReadU32(is, "model header");
  net.num_classes = binary::ReadU32(is, "model header");
  for (std::uint32_t i = 0; i < num_layers; i++) {
    const Index rows = binary::ReadU32(is, "layer header");
    const Index cols = binary::ReadU32(is, "layer header");
    const std::uint32_t tag = binary::ReadU32(is, "layer header");
    if (tag > 3) throw Error("model file: bad nonlinearity tag");
    Nonlinearity nl;
    nl.type = static_cast<NonlinearityType>(tag);
    nl.p = binary::ReadF32(is, "layer header");
    nl.group = static_cast<int>(binary::ReadU32(is, "layer header"));
    net.layers.push_back({Matrix<Real>(rows, cols), nl});
  }
  for (Layer<Real> &l : net.layers)
    for (Real &v : l.weights.values()) v = Real(binary::ReadF32(is, "weights"));
  net.Check();
  return net;
}

template <typename Real>
void WriteNetworkFile(const std::string &path, const Network<Real> &net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  WriteNetwork(os, net);
}

template <typename Real>
Network<Real> ReadNetworkFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open model file " + path);
  return ReadNetwork<Real>(is);
}

#define NGSGD_INSTANTIATE_NNET(Real)                                          \
  template struct Layer<Real>;                                               \
  template struct Network<Real>;                                             \
  template Network<Real> InitNetwork<Real>(const std::vector<Index> &,       \
                                           const Nonlinearity &,             \
                                           std::uint64_t);                   \
  template ForwardState<Real> Forward<Real>(const Network<Real> &,           \
                                            const Matrix<Real> &);           \
  template BackpropBundle<Real> Backprop<Real>(                              \
      const Network<Real> &, ForwardState<Real>,                             \
      std::span<const std::int32_t>);                                        \
  template double Objective<Real>(const Network<Real> &, const Matrix<Real> &, \
                                  std::span<const std::int32_t>);            \
  template double Accuracy<Real>(const Network<Real> &, const Matrix<Real> &, \
                                 std::span<const std::int32_t>);             \
  template Network<Real> AddHiddenLayer<Real>(                               \
      const Network<Real> &, Index, std::uint64_t, const Nonlinearity &);    \
  template void WriteNetwork<Real>(std::ostream &, const Network<Real> &);   \
  template Network<Real> ReadNetwork<Real>(std::istream &);                  \
  template void WriteNetworkFile<Real>(const std::string &,                  \
                                       const Network<Real> &);               \
  template Network<Real> ReadNetworkFile<Real>(const std::string &);

NGSGD_INSTANTIATE_NNET(float)
NGSGD_INSTANTIATE_NNET(double)

}  // namespace ngsgd
