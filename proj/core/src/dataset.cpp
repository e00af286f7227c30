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
#include "iwr/dataset.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "iwr/error.hpp"
#include "iwr/hash.hpp"

namespace iwr {

namespace {

constexpr std::array<char, 4> kMagic = {'I', 'W', 'R', 'E'};

void check_finite(const RowMatrix& data) {
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (!std::isfinite(data(r, c))) {
        throw Error(ErrorCode::kNonFinite,
                    "row " + std::to_string(r) + ", column " + std::to_string(c));
      }
    }
  }
}

template <typename T>
T read_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size() && !text.empty();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

EmbeddingDataset load_binary(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < kBinaryHeaderSize) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": file shorter than header");
  }
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": field magic is not IWRE");
  }
  const auto version = read_le<std::uint16_t>(bytes.data() + 4);
  if (version != kBinaryFormatVersion) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ": field version has unsupported value " + std::to_string(version));
  }
  const auto dtype = read_le<std::uint16_t>(bytes.data() + 6);
  if (dtype != static_cast<std::uint16_t>(StorageType::kF32) &&
      dtype != static_cast<std::uint16_t>(StorageType::kF64)) {
    throw Error(ErrorCode::kMalformedHeader,
                path.string() + ": field dtype has unsupported value " + std::to_string(dtype));
  }
  const auto n = read_le<std::uint64_t>(bytes.data() + 8);
  const auto d = read_le<std::uint32_t>(bytes.data() + 16);
  if (n == 0 || d == 0) {
    throw Error(ErrorCode::kEmptyDataset, path.string() + ": header declares N=" +
                                              std::to_string(n) + ", d=" + std::to_string(d));
  }
  const std::size_t width = dtype == 0 ? 4 : 8;
  const std::size_t payload = bytes.size() - kBinaryHeaderSize;
  if (n > payload / width / d || payload != n * d * width) {
    throw Error(ErrorCode::kPayloadMismatch,
                path.string() + ": payload length mismatch: header declares N=" + std::to_string(n) + ", d=" +
                    std::to_string(d) + " but payload holds " + std::to_string(payload) + " bytes");
  }

  RowMatrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::uint8_t* p = bytes.data() + kBinaryHeaderSize;
  double* out = data.data();
  for (std::size_t i = 0; i < n * d; ++i) {
    if (width == 4) {
      out[i] = static_cast<double>(std::bit_cast<float>(read_le<std::uint32_t>(p + 4 * i)));
    } else {
      out[i] = std::bit_cast<double>(read_le<std::uint64_t>(p + 8 * i));
    }
  }
  check_finite(data);
  std::string id = content_id(data, path.stem().string());
  return EmbeddingDataset(std::move(data), std::move(id));
}

EmbeddingDataset load_csv(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::kEmptyDataset, path.string() + ": no rows");
  std::vector<double> values;
  std::size_t dim = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = split_commas(lines[r]);
    if (r == 0) dim = fields.size();
    if (fields.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, path.string() + ": row " + std::to_string(r) +
                                                     " has " + std::to_string(fields.size()) +
                                                     " fields, expected " + std::to_string(dim));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_number(fields[c], v)) {
        throw Error(ErrorCode::kMalformedHeader, path.string() + ": row " + std::to_string(r) +
                                                     ", column " + std::to_string(c) +
                                                     " is not a number");
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFinite, path.string() + ": row " + std::to_string(r) +
                                               ", column " + std::to_string(c));
      }
      values.push_back(v);
    }
  }
  RowMatrix data = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(lines.size()),
                                               static_cast<Eigen::Index>(dim));
  std::string id = content_id(data, path.stem().string());
  return EmbeddingDataset(std::move(data), std::move(id));
}

}  // namespace

EmbeddingDataset::EmbeddingDataset(RowMatrix data, std::string source_id)
    : data_(std::move(data)), source_id_(std::move(source_id)) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw Error(ErrorCode::kEmptyDataset, "N=" + std::to_string(data_.rows()) +
                                              ", d=" + std::to_string(data_.cols()));
  }
  check_finite(data_);
}

EmbeddingDataset EmbeddingDataset::select_rows(std::span<const std::size_t> indices,
                                               std::string source_id) const {
  RowMatrix out(static_cast<Eigen::Index>(indices.size()), data_.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "row " + std::to_string(indices[i]) + " of " + std::to_string(rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(indices[i]));
  }
  return EmbeddingDataset(std::move(out), std::move(source_id));
}

std::string content_id(const RowMatrix& data, std::string_view stem) {
  Fnv1a h;
  h.update_u64(static_cast<std::uint64_t>(data.rows())).update_u64(static_cast<std::uint64_t>(data.cols()));
  for (Eigen::Index i = 0; i < data.size(); ++i) h.update_f64(data.data()[i]);
  return std::string(stem) + "@" + h.hex();
}

EmbeddingFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? EmbeddingFormat::kCsv : EmbeddingFormat::kBinary;
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
  return format == EmbeddingFormat::kCsv ? load_csv(path) : load_binary(path);
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path) {
  return load_embeddings(path, format_for_path(path));
}

void save_embeddings(const EmbeddingDataset& dataset, const std::filesystem::path& path,
                     StorageType storage) {
  const std::size_t width = storage == StorageType::kF32 ? 4 : 8;
  std::vector<std::uint8_t> bytes;
  bytes.reserve(kBinaryHeaderSize + dataset.rows() * dataset.dim() * width);
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  append_le<std::uint16_t>(bytes, kBinaryFormatVersion);
  append_le<std::uint16_t>(bytes, static_cast<std::uint16_t>(storage));
  append_le<std::uint64_t>(bytes, dataset.rows());
  append_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(dataset.dim()));
  const double* values = dataset.data().data();
  for (std::size_t i = 0; i < dataset.rows() * dataset.dim(); ++i) {
    if (storage == StorageType::kF32) {
      append_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    } else {
      append_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(values[i]));
    }
  }
  write_file(path, bytes);
}

void save_embeddings_csv(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.precision(17);
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    const auto row = dataset.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<RowMetadata> load_metadata(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw Error(ErrorCode::kMetadataInvalid, path.string() + ": missing header");
  const auto header = split_commas(lines.front());
  if (header.size() < 3 || header[0] != "episode_id" || header[1] != "step_index" ||
      header[2] != "episode_length" || (header.size() == 4 && header[3] != "task_label") ||
      header.size() > 4) {
    throw Error(ErrorCode::kMetadataInvalid,
                path.string() + ": header must be episode_id,step_index,episode_length[,task_label]");
  }
  std::vector<RowMetadata> meta;
  meta.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_commas(lines[r]);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kMetadataInvalid, path.string() + ": row " + std::to_string(r - 1) +
                                                   " has " + std::to_string(fields.size()) + " fields");
    }
    RowMetadata m;
    const char* names[] = {"episode_id", "step_index", "episode_length"};
    std::int64_t* slots[] = {&m.episode_id, &m.step_index, &m.episode_length};
    for (int f = 0; f < 3; ++f) {
      if (!parse_number(fields[f], *slots[f])) {
        throw Error(ErrorCode::kMetadataInvalid, path.string() + ": row " + std::to_string(r - 1) +
                                                     ", field " + names[f] + " is not an integer");
      }
    }
    if (fields.size() == 4 && !fields[3].empty()) m.task_label = std::string(fields[3]);
    meta.push_back(std::move(m));
  }
  try {
    validate_metadata(meta);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  return meta;
}

void save_metadata(std::span<const RowMetadata> meta, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "episode_id,step_index,episode_length,task_label\n";
  for (const RowMetadata& m : meta) {
    if (m.task_label && m.task_label->find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::kMetadataInvalid, "task_label may not contain commas or newlines");
    }
    out << m.episode_id << ',' << m.step_index << ',' << m.episode_length << ','
        << m.task_label.value_or("") << '\n';
  }
  const std::string text = out.str();
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void validate_metadata(std::span<const RowMetadata> meta) {
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const RowMetadata& m = meta[i];
    if (m.episode_length < 1 || m.step_index < 0 || m.step_index >= m.episode_length) {
      throw Error(ErrorCode::kMetadataInvalid,
                  "row " + std::to_string(i) + ": step_index " + std::to_string(m.step_index) +
                      " outside [0, episode_length=" + std::to_string(m.episode_length) + ")");
    }
  }
}

void validate_pairing(const EmbeddingDataset& dataset, std::span<const RowMetadata> meta) {
  if (meta.size() != dataset.rows()) {
    throw Error(ErrorCode::kRowCountMismatch, "metadata has " + std::to_string(meta.size()) +
                                                  " rows, dataset has " + std::to_string(dataset.rows()));
  }
  validate_metadata(meta);
}

}  // namespace iwr
