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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iwr/dataset.hpp"
#include "iwr/retrieval.hpp"

namespace iwr {

enum class Relevance { kRelevant, kMixed, kHarmful };

std::string_view to_string(Relevance relevance);
Relevance parse_relevance(std::string_view name);

using RelevanceLabels = std::map<std::string, Relevance>;

/// JSON object mapping task label to "relevant" | "mixed" | "harmful".
RelevanceLabels load_relevance_labels(const std::filesystem::path& path);
void save_relevance_labels(const RelevanceLabels& labels, const std::filesystem::path& path);

/// Task name used for rows without a task label when other rows have one.
inline constexpr std::string_view kUnlabeledTask = "unlabeled";

struct TaskBreakdown {
  std::map<std::string, std::size_t> per_task_counts;
  std::map<std::string, double> per_task_fractions;
  std::map<std::string, Relevance> relevance_labels;
  /// One entry per selected task that had no relevance label.
  std::vector<std::string> warnings;

  bool empty() const { return per_task_counts.empty(); }
};

/// Counts selected rows per task label. Tasks missing from `labels` are
/// labeled harmful and reported in `warnings`. If no metadata row carries a
/// task label the breakdown is empty.
TaskBreakdown task_breakdown(const RetrievalManifest& manifest, std::span<const RowMetadata> meta,
                             const RelevanceLabels& labels);

inline constexpr std::size_t kDefaultBinCount = 10;

struct TimestepHistogram {
  std::size_t bin_count = kDefaultBinCount;
  std::vector<std::size_t> counts;
  std::vector<double> normalized;
};

/// floor(step * bins / length).
std::size_t timestep_bin(std::int64_t step_index, std::int64_t episode_length, std::size_t bin_count);

TimestepHistogram timestep_histogram(const RetrievalManifest& manifest,
                                     std::span<const RowMetadata> meta,
                                     std::size_t bin_count = kDefaultBinCount);

/// Selected counts per (task, bin); empty when rows carry no task labels.
std::map<std::string, std::vector<std::size_t>> task_bin_counts(const RetrievalManifest& manifest,
                                                                std::span<const RowMetadata> meta,
                                                                std::size_t bin_count);

struct RetrievalQuality {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t selected = 0;
  std::size_t relevant = 0;

  friend bool operator==(const RetrievalQuality&, const RetrievalQuality&) = default;
};

struct AnalysisReport {
  std::string method;
  std::string config_fingerprint;
  std::size_t selection_size = 0;
  TaskBreakdown tasks;
  std::map<std::string, std::vector<std::size_t>> task_bins;
  TimestepHistogram histogram;
  std::optional<RetrievalQuality> ground_truth;
};

/// Runs the breakdown, histogram and per-task-bin counts for one manifest.
AnalysisReport build_report(const RetrievalManifest& manifest, std::span<const RowMetadata> meta,
                            const RelevanceLabels& labels, std::size_t bin_count);

/// JSON report, schema "iwr-report/1":
///   method, config_fingerprint, selection_size,
///   tasks: [{task, count, fraction, relevance}]   (omitted without task labels)
///   task_bins: {task: [counts...]}                 (omitted without task labels)
///   timesteps: {bin_count, counts, normalized}
///   ground_truth: {precision, recall, true_positives, selected, relevant}  (optional)
void emit_report(const AnalysisReport& report, const std::filesystem::path& path);
AnalysisReport parse_report(const std::filesystem::path& path);

}  // namespace iwr
