#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "textddi/common.hpp"
#include "textddi/corpus.hpp"

namespace textddi {

/// Unweighted mean of per-type F1 over all n_types types; a type with
/// precision + recall == 0 contributes 0.
double macro_f1(std::span<const int> predictions, std::span<const int> labels, int n_types);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

/// (P_o - P_e) / (1 - P_e); defined as 0 (with a warning) when P_e == 1.
double cohens_kappa(std::span<const int> predictions, std::span<const int> labels, int n_types);

/// Area under the ROC curve; equal scores form one operating point and the
/// curve is interpolated linearly across it (half credit for ties).
double roc_auc(std::span<const double> scores, std::span<const int> binary_labels);

/// Sum over operating points of precision * (recall increment).
double pr_auc(std::span<const double> scores, std::span<const int> binary_labels);

/// For every positive (u, i, v) in `triples`, emits it plus one negative
/// (u', i, v') with the unordered pair drawn uniformly among pairs that are
/// not positive for type i anywhere in the corpus.
std::vector<Triple> negative_sample(std::span<const Triple> triples, const Corpus& corpus,
                                    Rng& rng);

enum class TaskMode { multiclass, multilabel };

struct MetricReport {
  TaskMode mode = TaskMode::multiclass;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double kappa = 0.0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  std::size_t n_samples = 0;

  /// macro_f1 for multiclass, pr_auc for multilabel.
  double primary() const { return mode == TaskMode::multiclass ? macro_f1 : pr_auc; }
  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

MetricReport multiclass_report(std::span<const int> predictions, std::span<const int> labels,
                               int n_types);

/// Per-type binary problems; AUCs are averaged over the types holding both
/// classes, accuracy thresholds scores at 0.5.
MetricReport multilabel_report(std::span<const double> scores, std::span<const int> types,
                               std::span<const int> binary_labels, int n_types);

}  // namespace textddi
