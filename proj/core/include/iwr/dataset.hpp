// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace iwr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// An N x d matrix of latent vectors. Immutable after construction; every
/// element is finite and N, d >= 1.
class EmbeddingDataset {
 public:
  EmbeddingDataset(RowMatrix data, std::string source_id);

  std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
  const RowMatrix& data() const { return data_; }
  const std::string& source_id() const { return source_id_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim(), dim()};
  }

  /// Rows in the given order. Indices must be < rows().
  EmbeddingDataset select_rows(std::span<const std::size_t> indices, std::string source_id) const;

  friend bool operator==(const EmbeddingDataset& a, const EmbeddingDataset& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() &&
           a.data_ == b.data_;
  }

 private:
  RowMatrix data_;
  std::string source_id_;
};

/// Content identity of a matrix: stem@fnv1a(dims, values). Any change to the
/// values changes the id.
std::string content_id(const RowMatrix& data, std::string_view stem);

enum class EmbeddingFormat { kBinary, kCsv };
enum class StorageType : std::uint16_t { kF32 = 0, kF64 = 1 };

/// ".csv" selects kCsv, anything else kBinary.
EmbeddingFormat format_for_path(const std::filesystem::path& path);

/// Binary layout, little-endian: "IWRE", u16 version (1), u16 dtype
/// (0 = f32, 1 = f64), u64 N, u32 d, then N*d row-major values.
/// CSV: one row per line, comma separated, no header.
EmbeddingDataset load_embeddings(const std::filesystem::path& path, EmbeddingFormat format);
EmbeddingDataset load_embeddings(const std::filesystem::path& path);

void save_embeddings(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                     StorageType storage = StorageType::kF64);
void save_embeddings_csv(const EmbeddingDataset& dataset, const std::filesystem::path& path);

inline constexpr std::uint16_t kBinaryFormatVersion = 1;
inline constexpr std::size_t kBinaryHeaderSize = 20;

struct RowMetadata {
  std::int64_t episode_id = 0;
  std::int64_t step_index = 0;
  std::int64_t episode_length = 1;
  std::optional<std::string> task_label;

  friend bool operator==(const RowMetadata&, const RowMetadata&) = default;
};

/// Sidecar CSV with header "episode_id,step_index,episode_length,task_label".
/// An empty task_label field means no label.
std::vector<RowMetadata> load_metadata(const std::filesystem::path& path);
void save_metadata(std::span<const RowMetadata> meta, const std::filesystem::path& path);

/// Throws kMetadataInvalid unless 0 <= step_index < episode_length.
void validate_metadata(std::span<const RowMetadata> meta);

/// Throws kRowCountMismatch when the counts differ; also runs validate_metadata.
void validate_pairing(const EmbeddingDataset& dataset, std::span<const RowMetadata> meta);

}  // namespace iwr
