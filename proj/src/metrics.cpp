#include "textddi/metrics.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace textddi {
namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DataError("metric inputs differ in length (" + std::to_string(a) + " vs " +
                    std::to_string(b) + ")");
  }
}

void check_range(std::span<const int> xs, int n_types) {
  for (int x : xs) {
    if (x < 0 || x >= n_types) throw DataError("class id " + std::to_string(x) + " out of range");
  }
}

struct OperatingPoint {
  double tp = 0, fp = 0;
};

// Cumulative (tp, fp) after each distinct score, highest score first.
std::vector<OperatingPoint> operating_points(std::span<const double> scores,
                                             std::span<const int> labels, double& pos,
                                             double& neg) {
  check_lengths(scores.size(), labels.size());
  pos = 0;
  neg = 0;
  for (int y : labels) (y ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw DataError("AUC needs both positive and negative samples");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<OperatingPoint> pts;
  OperatingPoint cur;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (labels[order[k]] ? cur.tp : cur.fp) += 1;
    if (k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]]) pts.push_back(cur);
  }
  return pts;
}

}  // namespace

double macro_f1(std::span<const int> predictions, std::span<const int> labels, int n_types) {
  check_lengths(predictions.size(), labels.size());
  if (n_types <= 0) throw DataError("macro_f1 needs n_types > 0");
  check_range(predictions, n_types);
  check_range(labels, n_types);
  std::vector<double> tp(n_types, 0), fp(n_types, 0), fn(n_types, 0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (predictions[k] == labels[k]) {
      tp[labels[k]] += 1;
    } else {
      fp[predictions[k]] += 1;
      fn[labels[k]] += 1;
    }
  }
  double sum = 0.0;
  for (int r = 0; r < n_types; ++r) {
    const double prec = tp[r] + fp[r] > 0 ? tp[r] / (tp[r] + fp[r]) : 0.0;
    const double rec = tp[r] + fn[r] > 0 ? tp[r] / (tp[r] + fn[r]) : 0.0;
    if (prec + rec > 0) sum += 2.0 * prec * rec / (prec + rec);
  }
  return sum / n_types;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  check_lengths(predictions.size(), labels.size());
  if (labels.empty()) throw DataError("accuracy of an empty sample");
  std::size_t hit = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) hit += predictions[k] == labels[k];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double cohens_kappa(std::span<const int> predictions, std::span<const int> labels, int n_types) {
  check_lengths(predictions.size(), labels.size());
  check_range(predictions, n_types);
  check_range(labels, n_types);
  const double po = accuracy(predictions, labels);
  std::vector<double> mp(n_types, 0), ml(n_types, 0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    mp[predictions[k]] += 1;
    ml[labels[k]] += 1;
  }
  const double n = static_cast<double>(labels.size());
  double pe = 0.0;
  for (int r = 0; r < n_types; ++r) pe += (mp[r] / n) * (ml[r] / n);
  if (pe >= 1.0) {
    std::cerr << "warning: cohens_kappa undefined for a single-class sample; reporting 0\n";
    return 0.0;
  }
  return (po - pe) / (1.0 - pe);
}

double roc_auc(std::span<const double> scores, std::span<const int> binary_labels) {
  double pos = 0, neg = 0;
  auto pts = operating_points(scores, binary_labels, pos, neg);
  double area = 0.0;
  OperatingPoint prev;
  for (const auto& pt : pts) {
    area += (pt.fp - prev.fp) * (pt.tp + prev.tp) * 0.5;
    prev = pt;
  }
  return area / (pos * neg);
}

double pr_auc(std::span<const double> scores, std::span<const int> binary_labels) {
  double pos = 0, neg = 0;
  auto pts = operating_points(scores, binary_labels, pos, neg);
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& pt : pts) {
    const double recall = pt.tp / pos;
    const double precision = pt.tp / (pt.tp + pt.fp);
    area += precision * (recall - prev_recall);
    prev_recall = recall;
  }
  return area;
}

std::vector<Triple> negative_sample(std::span<const Triple> triples, const Corpus& corpus,
                                    Rng& rng) {
  const auto& drugs = corpus.drugs();
  const std::size_t n = drugs.size();
  if (n < 2) throw DataError("negative sampling needs at least two drugs");
  const std::size_t n_pairs = n * (n - 1) / 2;
  std::map<int, std::set<std::pair<std::size_t, std::size_t>>> positive;
  for (const auto& t : corpus.triples()) {
    if (t.polarity != Polarity::positive) continue;
    auto a = *corpus.find_drug(t.u), b = *corpus.find_drug(t.v);
    positive[t.type].insert(std::minmax(a, b));
  }
  std::vector<Triple> out;
  out.reserve(2 * triples.size());
  for (const auto& t : triples) {
    if (t.polarity != Polarity::positive) continue;
    out.push_back(t);
    const auto& taken = positive[t.type];
    if (taken.size() >= n_pairs) {
      throw DataError("type " + std::to_string(t.type) + " is positive for every pair");
    }
    std::size_t a = 0, b = 1;
    const std::size_t free = n_pairs - taken.size();
    if (free * 100 >= n_pairs) {
      // Rejection sampling over uniform unordered pairs.
      do {
        a = uniform_index(rng, n);
        b = uniform_index(rng, n - 1);
        if (b >= a) ++b;
        if (a > b) std::swap(a, b);
      } while (taken.count({a, b}));
    } else {
      // Dense types: uniform rank among the free pairs, walking (a < b) in order.
      std::size_t r = uniform_index(rng, free);
      for (;;) {
        if (!taken.count({a, b})) {
          if (r == 0) break;
          --r;
        }
        if (++b == n) {
          ++a;
          b = a + 1;
        }
      }
    }
    out.push_back({drugs[a].id, t.type, drugs[b].id, Polarity::negative});
  }
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["mode"] = mode == TaskMode::multiclass ? "multiclass" : "multilabel";
  j["n_samples"] = n_samples;
  j["accuracy"] = accuracy;
  if (mode == TaskMode::multiclass) {
    j["macro_f1"] = macro_f1;
    j["kappa"] = kappa;
  } else {
    j["roc_auc"] = roc_auc;
    j["pr_auc"] = pr_auc;
  }
  return j;
}

std::string MetricReport::csv_header() { return "macro_f1,accuracy,kappa,roc_auc,pr_auc,n_samples"; }

std::string MetricReport::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << macro_f1 << ',' << accuracy << ',' << kappa << ',' << roc_auc << ',' << pr_auc << ','
     << n_samples;
  return os.str();
}

MetricReport multiclass_report(std::span<const int> predictions, std::span<const int> labels,
                               int n_types) {
  MetricReport r;
  r.mode = TaskMode::multiclass;
  r.n_samples = labels.size();
  r.macro_f1 = textddi::macro_f1(predictions, labels, n_types);
  r.accuracy = textddi::accuracy(predictions, labels);
  r.kappa = cohens_kappa(predictions, labels, n_types);
  return r;
}

MetricReport multilabel_report(std::span<const double> scores, std::span<const int> types,
                               std::span<const int> binary_labels, int n_types) {
  check_lengths(scores.size(), types.size());
  check_lengths(scores.size(), binary_labels.size());
  check_range(types, n_types);
  MetricReport r;
  r.mode = TaskMode::multilabel;
  r.n_samples = scores.size();
  std::size_t hits = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    hits += (scores[k] >= 0.5) == (binary_labels[k] != 0);
  }
  r.accuracy = scores.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(scores.size());
  double roc = 0, pr = 0;
  int used = 0;
  for (int t = 0; t < n_types; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (types[k] != t) continue;
      s.push_back(scores[k]);
      y.push_back(binary_labels[k] != 0);
    }
    const auto npos = std::count(y.begin(), y.end(), 1);
    if (npos == 0 || npos == static_cast<long>(y.size())) continue;
    roc += textddi::roc_auc(s, y);
    pr += textddi::pr_auc(s, y);
    ++used;
  }
  if (used > 0) {
    r.roc_auc = roc / used;
    r.pr_auc = pr / used;
  }
  return r;
}

}  // namespace textddi
