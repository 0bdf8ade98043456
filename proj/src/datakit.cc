// ngsgd/datakit.cc

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

#include "ngsgd/datakit.h"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "ngsgd/binary-io.h"

namespace ngsgd {

namespace {

constexpr char kBlockMagic[5] = "NGEX";
constexpr std::uint32_t kBlockVersion = 1;

}  // namespace

void Dataset::Check() const {
  if (static_cast<Index>(labels.size()) != features.rows())
    throw Error("Dataset: label count does not match feature rows");
  if (num_classes < 1) throw Error("Dataset: num_classes must be >= 1");
  for (std::int32_t y : labels)
    if (y < 0 || y >= num_classes)
      throw Error("Dataset: label " + std::to_string(y) + " out of range");
  if (!features.AllFinite()) throw Error("Dataset: non-finite feature");
}

Dataset Dataset::Slice(Index begin, Index count) const {
  if (begin < 0 || count < 0 || begin + count > size())
    throw Error("Dataset::Slice: range out of bounds");
  Dataset out;
  out.num_classes = num_classes;
  out.features.Resize(count, dim());
  std::copy(features.data() + begin * dim(),
            features.data() + (begin + count) * dim(), out.features.data());
  out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
  return out;
}

Dataset Concatenate(const std::vector<Dataset> &parts) {
  if (parts.empty()) throw Error("Concatenate: no parts");
  Index rows = 0;
  for (const Dataset &p : parts) {
    if (p.dim() != parts[0].dim() || p.num_classes != parts[0].num_classes)
      throw Error("Concatenate: parts disagree on dim or num_classes");
    rows += p.size();
  }
  Dataset out;
  out.num_classes = parts[0].num_classes;
  out.features.Resize(rows, parts[0].dim());
  BaseFloat *dst = out.features.data();
  for (const Dataset &p : parts) {
    dst = std::copy(p.features.data(), p.features.data() + p.features.size(),
                    dst);
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

Dataset GenerateSynthetic(int num_classes, Index dim, Index num_samples,
                          double separation, std::uint64_t seed) {
  if (num_classes < 2) throw Error("GenerateSynthetic: need >= 2 classes");
  if (dim < 2) throw Error("GenerateSynthetic: need dim >= 2");
  if (num_samples < 0 || !(separation >= 0))
    throw Error("GenerateSynthetic: bad sample count or separation");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> means(num_classes * dim);
  for (int c = 0; c < num_classes; c++) {
    double norm = 0;
    double *m = &means[c * dim];
    do {
      norm = 0;
      for (Index j = 0; j < dim; j++) {
        m[j] = gauss(rng);
        norm += m[j] * m[j];
      }
    } while (norm == 0);
    norm = std::sqrt(norm);
    for (Index j = 0; j < dim; j++) m[j] *= separation / norm;
  }

  Dataset data;
  data.num_classes = num_classes;
  data.features.Resize(num_samples, dim);
  data.labels.resize(num_samples);
  std::uniform_int_distribution<int> pick(0, num_classes - 1);
  for (Index i = 0; i < num_samples; i++) {
    const int c = pick(rng);
    data.labels[i] = c;
    for (Index j = 0; j < dim; j++)
      data.features(i, j) = BaseFloat(means[c * dim + j] + gauss(rng));
  }
  return data;
}

std::vector<Dataset> RandomizeBlocks(const Dataset &data, int n_jobs,
                                     int m_per_epoch, std::uint64_t seed) {
  if (n_jobs < 1 || m_per_epoch < 1)
    throw Error("RandomizeBlocks: jobs and iterations must be >= 1");
  const Index num_blocks = Index(n_jobs) * m_per_epoch;
  if (data.size() < num_blocks)
    throw Error("RandomizeBlocks: " + std::to_string(data.size()) +
                " samples cannot fill " + std::to_string(num_blocks) +
                " blocks");
  std::vector<Index> perm(data.size());
  std::iota(perm.begin(), perm.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const Index base = data.size() / num_blocks, extra = data.size() % num_blocks;
  std::vector<Dataset> blocks(num_blocks);
  Index pos = 0;
  for (Index b = 0; b < num_blocks; b++) {
    const Index count = base + (b < extra ? 1 : 0);
    Dataset &blk = blocks[b];
    blk.num_classes = data.num_classes;
    blk.features.Resize(count, data.dim());
    blk.labels.resize(count);
    for (Index i = 0; i < count; i++, pos++) {
      auto src = data.features.row(perm[pos]);
      std::copy(src.begin(), src.end(), blk.features.row(i).begin());
      blk.labels[i] = data.labels[perm[pos]];
    }
  }
  return blocks;
}

double DecodeLevel(const ExampleBlock &block, std::uint32_t col,
                   std::uint8_t q) {
  return double(block.col_min[col]) +
         double(q) * double(block.col_range[col]) / 255.0;
}

ExampleBlock EncodeBlock(const Dataset &data) {
  data.Check();
  const Index n = data.size(), dim = data.dim();
  ExampleBlock block;
  block.num_classes = static_cast<std::uint32_t>(data.num_classes);
  block.feature_dim = static_cast<std::uint32_t>(dim);
  block.col_min.assign(dim, 0.0f);
  block.col_range.assign(dim, 0.0f);
  for (Index j = 0; j < dim; j++) {
    double lo = 0, hi = 0;
    for (Index i = 0; i < n; i++) {
      const double v = data.features(i, j);
      if (i == 0 || v < lo) lo = v;
      if (i == 0 || v > hi) hi = v;
    }
    block.col_min[j] = static_cast<float>(lo);
    // Round the range up so the top level reaches the column maximum.
    float range = static_cast<float>(hi - double(block.col_min[j]));
    while (double(block.col_min[j]) + double(range) < hi)
      range = std::nextafter(range, std::numeric_limits<float>::infinity());
    block.col_range[j] = range;
  }
  block.labels.assign(data.labels.begin(), data.labels.end());
  block.payload.resize(static_cast<std::size_t>(n * dim));
  for (Index i = 0; i < n; i++) {
    for (Index j = 0; j < dim; j++) {
      const double v = data.features(i, j);
      const double range = block.col_range[j];
      std::uint8_t q = 0;
      if (range > 0) {
        const double pos = (v - double(block.col_min[j])) / range * 255.0;
        const int lo = std::clamp(int(std::floor(pos)), 0, 255);
        const int hi = std::min(lo + 1, 255);
        const double e_lo = std::abs(DecodeLevel(block, j, lo) - v);
        const double e_hi = std::abs(DecodeLevel(block, j, hi) - v);
        q = static_cast<std::uint8_t>(e_hi < e_lo ? hi : lo);
      }
      block.payload[i * dim + j] = q;
    }
  }
  return block;
}

Dataset DecodeBlock(const ExampleBlock &block) {
  const Index n = block.num_examples(), dim = block.feature_dim;
  if (block.payload.size() != static_cast<std::size_t>(n * dim) ||
      block.col_min.size() != block.feature_dim ||
      block.col_range.size() != block.feature_dim)
    throw Error("DecodeBlock: inconsistent block");
  // 256-entry table per column.
  std::vector<BaseFloat> table(static_cast<std::size_t>(dim) * 256);
  for (Index j = 0; j < dim; j++)
    for (int q = 0; q < 256; q++)
      table[j * 256 + q] = BaseFloat(DecodeLevel(block, j, std::uint8_t(q)));
  Dataset data;
  data.num_classes = static_cast<std::int32_t>(block.num_classes);
  data.features.Resize(n, dim);
  data.labels.resize(n);
  for (Index i = 0; i < n; i++) {
    data.labels[i] = static_cast<std::int32_t>(block.labels[i]);
    for (Index j = 0; j < dim; j++)
      data.features(i, j) = table[j * 256 + block.payload[i * dim + j]];
  }
  data.Check();
  return data;
}

void WriteBlock(std::ostream &os, const ExampleBlock &block) {
  binary::WriteMagic(os, kBlockMagic);
  binary::WriteU32(os, kBlockVersion);
  binary::WriteU32(os, block.num_examples());
  binary::WriteU32(os, block.feature_dim);
  binary::WriteU32(os, block.num_classes);
  for (std::uint32_t j = 0; j < block.feature_dim; j++) {
    binary::WriteF32(os, block.col_min[j]);
    binary::WriteF32(os, block.col_range[j]);
  }
  const std::size_t dim = block.feature_dim;
  for (std::size_t i = 0; i < block.labels.size(); i++) {
    binary::WriteU32(os, block.labels[i]);
    os.write(reinterpret_cast<const char *>(block.payload.data() + i * dim),
             static_cast<std::streamsize>(dim));
  }
  if (!os) throw Error("WriteBlock: write failed");
}

ExampleBlock ReadBlock(std::istream &is) {
  binary::ExpectMagic(is, kBlockMagic, "example block");
  const std::uint32_t version = binary::ReadU32(is, "block version");
  if (version != kBlockVersion)
    throw Error("example block: unsupported version " +
                std::to_string(version));
  ExampleBlock block;
  const std::uint32_t n = binary::ReadU32(is, "block header");
  block.feature_dim = binary::ReadU32(is, "block header");
  block.num_classes = binary::ReadU32(is, "block header");
  if (block.num_classes == 0) throw Error("example block: zero classes");
  const std::size_t dim = block.feature_dim;
  block.col_min.resize(dim);
  block.col_range.resize(dim);
  for (std::size_t j = 0; j < dim; j++) {
    block.col_min[j] = binary::ReadF32(is, "block codebook");
    block.col_range[j] = binary::ReadF32(is, "block codebook");
    if (!std::isfinite(block.col_min[j]) ||
        !(block.col_range[j] >= 0 && std::isfinite(block.col_range[j])))
      throw Error("example block: bad codebook entry");
  }
  block.labels.resize(n);
  block.payload.resize(std::size_t(n) * dim);
  for (std::size_t i = 0; i < n; i++) {
    block.labels[i] = binary::ReadU32(is, "block payload");
    if (block.labels[i] >= block.num_classes)
      throw Error("example block: label out of range");
    binary::ReadExact(is, block.payload.data() + i * dim, dim,
                      "block payload");
  }
  return block;
}

void WriteBlockFile(const std::string &path, const ExampleBlock &block) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  WriteBlock(os, block);
}

ExampleBlock ReadBlockFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open example block " + path);
  return ReadBlock(is);
}

Dataset ReadCsvDataset(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open CSV file " + path);
  auto split = [](const std::string &line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
        cell.pop_back();
      cell.erase(0, cell.find_first_not_of(' '));
      cells.push_back(cell);
    }
    return cells;
  };
  std::string line;
  if (!std::getline(is, line)) throw Error(path + ": empty CSV file");
  const std::vector<std::string> header = split(line);
  auto it = std::find(header.begin(), header.end(), "label");
  if (it == header.end()) throw Error(path + ": no column named \"label\"");
  const std::size_t label_col = it - header.begin();
  const Index dim = static_cast<Index>(header.size()) - 1;
  if (dim < 1) throw Error(path + ": no feature columns");

  std::vector<BaseFloat> values;
  std::vector<std::int32_t> labels;
  Index line_no = 1;
  while (std::getline(is, line)) {
    line_no++;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw Error(path + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(header.size()) + " fields");
    for (std::size_t c = 0; c < cells.size(); c++) {
      const std::string &s = cells[c];
      if (c == label_col) {
        std::int32_t y = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), y);
        if (ec != std::errc() || p != s.data() + s.size() || y < 0)
          throw Error(path + ":" + std::to_string(line_no) + ": bad label '" +
                      s + "'");
        labels.push_back(y);
      } else {
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
          throw Error(path + ":" + std::to_string(line_no) +
                      ": bad number '" + s + "'");
        values.push_back(BaseFloat(v));
      }
    }
  }
  Dataset data;
  const Index n = static_cast<Index>(labels.size());
  data.features.Resize(n, dim);
  std::copy(values.begin(), values.end(), data.features.data());
  data.labels = std::move(labels);
  data.num_classes =
      n == 0 ? 1 : *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  return data;
}

NormalizationTransform ComputeInputTransform(const Dataset &data) {
  data.Check();
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;
  const Index n = data.size(), dim = data.dim();
  const int num_classes = data.num_classes;
  if (num_classes < 2)
    throw Error("ComputeInputTransform: need at least 2 classes");
  NormalizationTransform t;
  if (num_classes < dim)
    t.warnings.push_back(
        "ComputeInputTransform: " + std::to_string(num_classes) +
        " classes for " + std::to_string(dim) +
        " dimensions; most directions will have near-zero between-class "
        "variance");

  Vec mean = Vec::Zero(dim);
  Mat class_sum = Mat::Zero(num_classes, dim);
  std::vector<Index> counts(num_classes, 0);
  for (Index i = 0; i < n; i++) {
    const int c = data.labels[i];
    counts[c]++;
    for (Index j = 0; j < dim; j++) {
      class_sum(c, j) += data.features(i, j);
      mean(j) += data.features(i, j);
    }
  }
  if (n == 0) throw Error("ComputeInputTransform: empty dataset");
  mean /= double(n);
  Mat class_mean = class_sum;
  for (int c = 0; c < num_classes; c++)
    if (counts[c] > 0) class_mean.row(c) /= double(counts[c]);

  Mat within = Mat::Zero(dim, dim);
  Vec diff(dim);
  for (Index i = 0; i < n; i++) {
    const int c = data.labels[i];
    for (Index j = 0; j < dim; j++)
      diff(j) = data.features(i, j) - class_mean(c, j);
    within.selfadjointView<Eigen::Lower>().rankUpdate(diff);
  }
  within = within.selfadjointView<Eigen::Lower>();
  within /= double(n);
  Mat between = Mat::Zero(dim, dim);
  for (int c = 0; c < num_classes; c++) {
    if (counts[c] == 0) continue;
    Vec d = class_mean.row(c).transpose() - mean;
    between += double(counts[c]) / double(n) * d * d.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Mat> weig(within);
  const Vec wl = weig.eigenvalues();
  if (!(wl(0) > 1e-10 * std::max(wl(dim - 1), 1e-300)))
    throw Error("ComputeInputTransform: within-class covariance is singular "
                "(not enough data?)");
  const Mat w_isqrt = weig.eigenvectors() *
                      wl.cwiseSqrt().cwiseInverse().asDiagonal() *
                      weig.eigenvectors().transpose();
  Mat b_white = w_isqrt * between * w_isqrt;
  b_white = 0.5 * (b_white + b_white.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> beig(b_white);
  // Descending b_i.
  Mat lda(dim, dim);
  t.lda_ratios.resize(dim);
  for (Index i = 0; i < dim; i++) {
    const Index src = dim - 1 - i;
    t.lda_ratios[i] = std::max(0.0, beig.eigenvalues()(src));
    lda.row(i) = beig.eigenvectors().col(src).transpose() * w_isqrt;
  }

  Mat scaled = lda;
  for (Index i = 0; i < dim; i++) {
    const double b = t.lda_ratios[i];
    scaled.row(i) *= std::sqrt((b + 0.001) / (b + 1.0));
  }

  Eigen::JacobiSVD<Mat> svd(scaled, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec s = svd.singularValues();
  const double floor = s(0) / 5.0;
  for (Index i = 0; i < s.size(); i++) s(i) = std::max(s(i), floor);
  const Mat final_map = svd.matrixU() * s.asDiagonal() *
                        svd.matrixV().transpose();
  const Vec offset = -final_map * mean;

  auto to_matrix = [](const Mat &m) {
    Matrix<double> out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); i++)
      for (Index j = 0; j < m.cols(); j++) out(i, j) = m(i, j);
    return out;
  };
  t.lda = to_matrix(lda);
  t.scaled = to_matrix(scaled);
  t.affine.Resize(dim, dim + 1);
  for (Index i = 0; i < dim; i++) {
    for (Index j = 0; j < dim; j++) t.affine(i, j) = final_map(i, j);
    t.affine(i, dim) = offset(i);
  }
  t.mean.assign(mean.data(), mean.data() + dim);
  return t;
}

Matrix<double> ApplyLinearCentered(const Matrix<double> &linear,
                                   const std::vector<double> &mean,
                                   const Matrix<BaseFloat> &x) {
  const Index dim = x.cols();
  if (linear.cols() != dim || static_cast<Index>(mean.size()) != dim)
    throw Error("ApplyLinearCentered: dimension mismatch");
  Matrix<double> out(x.rows(), linear.rows());
  std::vector<double> centered(dim);
  for (Index i = 0; i < x.rows(); i++) {
    for (Index j = 0; j < dim; j++) centered[j] = double(x(i, j)) - mean[j];
    for (Index r = 0; r < linear.rows(); r++) {
      double s = 0;
      for (Index j = 0; j < dim; j++) s += linear(r, j) * centered[j];
      out(i, r) = s;
    }
  }
  return out;
}

void ApplyInputTransform(const NormalizationTransform &t, Dataset *data) {
  const Index dim = data->dim();
  if (t.affine.rows() != dim || t.affine.cols() != dim + 1)
    throw Error("ApplyInputTransform: transform is for a different dimension");
  std::vector<double> row(dim);
  for (Index i = 0; i < data->size(); i++) {
    auto x = data->features.row(i);
    for (Index r = 0; r < dim; r++) {
      double s = t.affine(r, dim);
      for (Index j = 0; j < dim; j++) s += t.affine(r, j) * double(x[j]);
      row[r] = s;
    }
    for (Index r = 0; r < dim; r++) x[r] = BaseFloat(row[r]);
  }
}

}  // namespace ngsgd
