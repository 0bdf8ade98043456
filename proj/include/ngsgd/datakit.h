// ngsgd/datakit.h

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

#ifndef NGSGD_DATAKIT_H_
#define NGSGD_DATAKIT_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ngsgd/matrix.h"

namespace ngsgd {

struct Dataset {
  Matrix<BaseFloat> features;         // num_samples x dim
  std::vector<std::int32_t> labels;   // one per row
  std::int32_t num_classes = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  /// Throws unless labels are in range and features finite.
  void Check() const;
  /// Rows [begin, begin + count).
  Dataset Slice(Index begin, Index count) const;
};

/// Concatenates datasets with equal dim and num_classes.
Dataset Concatenate(const std::vector<Dataset> &parts);

/// Class means on a sphere of radius `separation` (random directions), unit
/// variance Gaussian noise around them, labels uniform over classes.
Dataset GenerateSynthetic(int num_classes, Index dim, Index num_samples,
                          double separation, std::uint64_t seed);

/// Shuffles once with a seeded permutation and cuts the result into
/// n_jobs * m_per_epoch contiguous blocks whose sizes differ by at most one
/// (the first `num_samples mod blocks` blocks get the extra sample).  Block
/// b = m * n_jobs + n is the one worker n reads at outer iteration m.
std::vector<Dataset> RandomizeBlocks(const Dataset &data, int n_jobs,
                                     int m_per_epoch, std::uint64_t seed);

/// A block of examples with features compressed to one byte per value.
/// Column j is quantized linearly over [col_min[j], col_min[j] + col_range[j]]
/// to 256 levels.
struct ExampleBlock {
  std::uint32_t num_classes = 0;
  std::uint32_t feature_dim = 0;
  std::vector<float> col_min, col_range;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> payload;  // num_examples x feature_dim, row-major

  std::uint32_t num_examples() const {
    return static_cast<std::uint32_t>(labels.size());
  }
};

/// Each value gets the level whose decoded value is nearest to it.
ExampleBlock EncodeBlock(const Dataset &data);
Dataset DecodeBlock(const ExampleBlock &block);
/// The decoded value of level q in column j, min + q * range / 255, before
/// rounding to the training precision.
double DecodeLevel(const ExampleBlock &block, std::uint32_t col,
                  std::uint8_t q);

/// File format, little-endian:
///   "NGEX", u32 version (1), u32 num_examples, u32 feature_dim,
///   u32 num_classes, feature_dim x {f32 min, f32 range},
///   num_examples x {u32 label, feature_dim x u8}.
void WriteBlock(std::ostream &os, const ExampleBlock &block);
ExampleBlock ReadBlock(std::istream &is);
void WriteBlockFile(const std::string &path, const ExampleBlock &block);
ExampleBlock ReadBlockFile(const std::string &path);

/// CSV with a header row; the column named "label" holds integer classes,
/// every other column is a numeric feature.  num_classes is max label + 1.
Dataset ReadCsvDataset(const std::string &path);

/// Affine input normalization based on LDA.
struct NormalizationTransform {
  Matrix<double> affine;            // D x (D + 1); last column is the offset
  std::vector<double> lda_ratios;   // b_i, descending
  // Intermediate linear maps, kept for inspection: the LDA transform that
  // whitens the within-class covariance, and the same after row scaling
  // (before the singular values are floored).
  Matrix<double> lda, scaled;
  std::vector<double> mean;
  std::vector<std::string> warnings;
};

/// Within-class covariance W and between-class covariance B; the LDA
/// transform T0 has T0 W T0^T = I and T0 B T0^T = diag(b).  Row i is scaled
/// by sqrt((b_i + 0.001) / (b_i + 1)), singular values are floored at
/// max / 5, and an offset centers the data.  Throws if W is singular.
NormalizationTransform ComputeInputTransform(const Dataset &data);

/// Row-wise y = L (x - m).  Used to inspect the intermediate maps.
Matrix<double> ApplyLinearCentered(const Matrix<double> &linear,
                                   const std::vector<double> &mean,
                                   const Matrix<BaseFloat> &x);

/// Applies the full affine transform in place.
void ApplyInputTransform(const NormalizationTransform &t, Dataset *data);

}  // namespace ngsgd

#endif  // NGSGD_DATAKIT_H_
