#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/linalg.hpp"
#include "lidkit/taxonomy.hpp"

namespace lidkit {

// Log-likelihood ratio for target class c from a posterior row, assuming
// flat priors: log( p_c / ((1/(K-1)) * sum_{c' != c} p_{c'}) ).
inline double posterior_llr(const Matrix& scores, std::size_t row,
                            std::size_t target) {
  double p = scores(row, target);
  double rest = 1.0 - p;
  std::size_t k = scores.cols;
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (rest <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log(p * double(k - 1) / rest);
}

// Bayes decision threshold for a detection prior p_target (unit costs).
inline double bayes_threshold(double p_target) {
  return std::log((1.0 - p_target) / p_target);
}

// Average detection cost over target languages at one operating point.
// Each language acts as a detector over all trials; decisions come from
// the LLR against the Bayes threshold, with ties rejected. Languages with
// zero trials are excluded from the average with a warning.
inline double detection_cost(const Matrix& scores,
                             const std::vector<std::size_t>& labels,
                             double p_target) {
  std::size_t n = scores.rows;
  std::size_t k = scores.cols;
  if (labels.size() != n)
    fail_input("detection_cost: ", labels.size(), " labels for ", n,
               " trials");
  if (k < 2) fail_input("detection_cost: need at least 2 languages, got ", k);
  // p_target = 1.0 is allowed (degenerate: false alarms cost nothing)
  if (!(p_target > 0.0 && p_target <= 1.0))
    fail_input("detection_cost: p_target ", p_target, " outside (0, 1]");
  std::vector<std::size_t> trials_per_lang(k, 0);
  for (std::size_t y : labels) {
    if (y >= k)
      fail_input("detection_cost: label ", y, " out of range [0, ", k, ")");
    ++trials_per_lang[y];
  }
  double threshold = bayes_threshold(p_target);
  double cost_sum = 0.0;
  std::size_t included = 0;
  for (std::size_t target = 0; target < k; ++target) {
    if (trials_per_lang[target] == 0) {
      log_warn("detection_cost: language index ", target,
               " has no trials; excluded from the average");
      continue;
    }
    std::size_t misses = 0;
    std::vector<std::size_t> false_accepts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      bool accept = posterior_llr(scores, i, target) > threshold;
      if (labels[i] == target) {
        if (!accept) ++misses;
      } else if (accept) {
        ++false_accepts[labels[i]];
      }
    }
    double p_miss = double(misses) / double(trials_per_lang[target]);
    double fa_sum = 0.0;
    for (std::size_t other = 0; other < k; ++other) {
      if (other == target || trials_per_lang[other] == 0) continue;
      fa_sum += double(false_accepts[other]) / double(trials_per_lang[other]);
    }
    cost_sum += p_target * p_miss +
                (1.0 - p_target) / double(k - 1) * fa_sum;
    ++included;
  }
  if (included == 0) fail_input("detection_cost: no language has trials");
  return cost_sum / double(included);
}

// Mean detection cost over the configured operating points
// (default {0.5, 0.1}).
inline double c_primary(const Matrix& scores,
                        const std::vector<std::size_t>& labels,
                        const Vec& p_targets = {0.5, 0.1}) {
  if (p_targets.empty()) fail_input("c_primary: no operating points");
  double sum = 0.0;
  for (double p : p_targets) sum += detection_cost(scores, labels, p);
  return sum / double(p_targets.size());
}

// Hard-decision specialization: the detector for L accepts exactly the
// trials whose argmax prediction is L, scored at p_target = 0.5.
inline double c_avg_simple(const std::vector<std::size_t>& predictions,
                           const std::vector<std::size_t>& labels,
                           std::size_t n_languages) {
  std::size_t n = predictions.size();
  if (labels.size() != n)
    fail_input("c_avg_simple: ", labels.size(), " labels for ", n,
               " predictions");
  if (n_languages < 2)
    fail_input("c_avg_simple: need at least 2 languages, got ", n_languages);
  std::vector<std::size_t> trials_per_lang(n_languages, 0);
  for (std::size_t y : labels) {
    if (y >= n_languages)
      fail_input("c_avg_simple: label ", y, " out of range");
    ++trials_per_lang[y];
  }
  double cost_sum = 0.0;
  std::size_t included = 0;
  for (std::size_t target = 0; target < n_languages; ++target) {
    if (trials_per_lang[target] == 0) {
      log_warn("c_avg_simple: language index ", target,
               " has no trials; excluded from the average");
      continue;
    }
    std::size_t misses = 0;
    std::vector<std::size_t> false_accepts(n_languages, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (predictions[i] >= n_languages)
        fail_input("c_avg_simple: prediction ", predictions[i],
                   " out of range");
      bool accept = predictions[i] == target;
      if (labels[i] == target) {
        if (!accept) ++misses;
      } else if (accept) {
        ++false_accepts[labels[i]];
      }
    }
    double p_miss = double(misses) / double(trials_per_lang[target]);
    double fa_sum = 0.0;
    std::size_t fa_terms = 0;
    for (std::size_t other = 0; other < n_languages; ++other) {
      if (other == target || trials_per_lang[other] == 0) continue;
      fa_sum += double(false_accepts[other]) / double(trials_per_lang[other]);
      ++fa_terms;
    }
    double mean_fa = fa_terms ? fa_sum / double(fa_terms) : 0.0;
    cost_sum += 0.5 * p_miss + 0.5 * mean_fa;
    ++included;
  }
  if (included == 0) fail_input("c_avg_simple: no language has trials");
  return cost_sum / double(included);
}

inline double accuracy(const std::vector<std::size_t>& predictions,
                       const std::vector<std::size_t>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    fail_input("accuracy: size mismatch or empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return double(hits) / double(predictions.size());
}

struct EncodingCell {
  std::string encoding;
  std::size_t trials = 0;
  double cavg = 0.0;      // c_primary over this encoding's trials
  double accuracy = 0.0;
};

struct CostReport {
  double accuracy = 0.0;
  Matrix confusion;  // row = true language, column = predicted
  std::vector<std::pair<double, double>> cavg_by_ptarget;
  double c_primary = 0.0;
  std::vector<EncodingCell> per_encoding;  // pooled "avg" is the last cell
};

inline std::vector<std::size_t> argmax_rows(const Matrix& scores) {
  std::vector<std::size_t> preds(scores.rows);
  for (std::size_t i = 0; i < scores.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols; ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    preds[i] = best;
  }
  return preds;
}

// Full evaluation: accuracy, confusion, costs per operating point, and the
// per-encoding breakdown. The pooled column uses all trials rather than
// the mean of the subset costs.
inline CostReport evaluate(const Matrix& scores,
                           const std::vector<std::size_t>& labels,
                           const std::vector<std::size_t>& encodings,
                           const Taxonomy& taxonomy,
                           const Vec& p_targets = {0.5, 0.1}) {
  std::size_t n = scores.rows;
  std::size_t k = taxonomy.n_languages();
  if (scores.cols != k)
    fail_input("evaluate: scores have ", scores.cols, " columns, taxonomy ",
               k, " languages");
  CostReport rep;
  std::vector<std::size_t> preds = argmax_rows(scores);
  rep.accuracy = accuracy(preds, labels);
  rep.confusion = Matrix(k, k);
  for (std::size_t i = 0; i < n; ++i)
    rep.confusion(labels[i], preds[i]) += 1.0;
  for (double p : p_targets)
    rep.cavg_by_ptarget.emplace_back(p, detection_cost(scores, labels, p));
  rep.c_primary = c_primary(scores, labels, p_targets);
  for (std::size_t e = 0; e < taxonomy.n_encodings(); ++e) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (encodings[i] == e) idx.push_back(i);
    if (idx.empty()) {
      log_warn("evaluate: encoding '", taxonomy.encodings[e],
               "' has no trials; omitted from the breakdown");
      continue;
    }
    Matrix sub(idx.size(), k);
    std::vector<std::size_t> sub_labels(idx.size()), sub_preds(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < k; ++c) sub(r, c) = scores(idx[r], c);
      sub_labels[r] = labels[idx[r]];
      sub_preds[r] = preds[idx[r]];
    }
    EncodingCell cell;
    cell.encoding = taxonomy.encodings[e];
    cell.trials = idx.size();
    cell.cavg = c_primary(sub, sub_labels, p_targets);
    cell.accuracy = accuracy(sub_preds, sub_labels);
    rep.per_encoding.push_back(cell);
  }
  EncodingCell pooled;
  pooled.encoding = "avg";
  pooled.trials = n;
  pooled.cavg = rep.c_primary;
  pooled.accuracy = rep.accuracy;
  rep.per_encoding.push_back(pooled);
  return rep;
}

namespace detail {

inline std::string format_cost(double cost) {
  // reported x100, matching the usual table convention
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", cost * 100.0);
  return buf;
}

}  // namespace detail

inline std::string report_to_text(const CostReport& rep,
                                  const Taxonomy& taxonomy) {
  std::ostringstream out;
  out << "overall\n";
  out << "  accuracy        " << detail::format_cost(rep.accuracy) << "\n";
  for (const auto& [p, cost] : rep.cavg_by_ptarget)
    out << "  cavg(p=" << p << ")    " << detail::format_cost(cost) << "\n";
  out << "  c_primary       " << detail::format_cost(rep.c_primary) << "\n";
  out << "per-encoding (c_primary x100 / accuracy x100 / trials)\n";
  for (const EncodingCell& cell : rep.per_encoding)
    out << "  " << cell.encoding << "\t" << detail::format_cost(cell.cavg)
        << "\t" << detail::format_cost(cell.accuracy) << "\t" << cell.trials
        << "\n";
  out << "confusion (rows = true language)\n";
  for (std::size_t r = 0; r < rep.confusion.rows; ++r) {
    out << "  " << taxonomy.languages[r];
    for (std::size_t c = 0; c < rep.confusion.cols; ++c)
      out << "\t" << static_cast<long long>(rep.confusion(r, c));
    out << "\n";
  }
  return out.str();
}

// Delimited form mirroring the per-encoding table layout.
inline std::string report_to_tsv(const CostReport& rep) {
  std::ostringstream out;
  out << "column\tc_primary_x100\taccuracy_x100\ttrials\n";
  for (const EncodingCell& cell : rep.per_encoding)
    out << cell.encoding << "\t" << detail::format_cost(cell.cavg) << "\t"
        << detail::format_cost(cell.accuracy) << "\t" << cell.trials << "\n";
  return out.str();
}

}  // namespace lidkit
