#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/data.hpp"
#include "lidkit/linalg.hpp"

namespace lidkit {

// Prior-derived per-class weights for the three label axes, plus the
// rescaling bounds they were built with. Weights for a training example
// are sums of two table entries, so they live in [2*x_min, 2*x_max].
struct WeightTable {
  Vec w_encoding;
  Vec w_cluster;   // per family
  Vec w_language;
  double x_min = 0.1;
  double x_max = 8.0;
};

enum class PriorMode { Global, MiniBatch };

inline const char* to_string(PriorMode m) {
  return m == PriorMode::Global ? "global" : "minibatch";
}

// Pr_i = n_i / sum_j n_j over a dense class space of size n_classes.
inline Vec estimate_priors(const std::vector<std::size_t>& labels,
                           std::size_t n_classes) {
  if (n_classes == 0) fail_input("estimate_priors: zero classes");
  if (labels.empty()) fail_input("estimate_priors: empty label list");
  Vec counts(n_classes, 0.0);
  for (std::size_t y : labels) {
    if (y >= n_classes)
      fail_input("estimate_priors: label ", y, " out of range [0, ",
                 n_classes, ")");
    counts[y] += 1.0;
  }
  double total = double(labels.size());
  for (double& c : counts) c /= total;
  return counts;
}

// w_i = max_j(Pr_j) / Pr_i, the inverted ratio against the dominant class.
inline Vec inverse_ratio_weights(const Vec& priors) {
  if (priors.empty()) fail_input("inverse_ratio_weights: empty priors");
  double mx = *std::max_element(priors.begin(), priors.end());
  Vec w(priors.size());
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (priors[i] <= 0.0)
      fail_input("inverse_ratio_weights: class ", i,
                 " has zero prior (never observed)");
    w[i] = mx / priors[i];
  }
  return w;
}

// Min-max rescale onto [x_min, x_max]. All-equal weights collapse to 1.0
// so balanced data stays unweighted.
inline Vec rescale_weights(const Vec& w, double x_min, double x_max) {
  if (!(x_min > 0.0)) fail_input("rescale_weights: x_min must be > 0, got ",
                                 x_min);
  if (!(x_max >= x_min))
    fail_input("rescale_weights: x_max ", x_max, " < x_min ", x_min);
  if (w.empty()) fail_input("rescale_weights: empty weights");
  double w_min = *std::min_element(w.begin(), w.end());
  double w_max = *std::max_element(w.begin(), w.end());
  Vec out(w.size());
  if (w_max == w_min) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    // ratio first: it is exactly 0 and 1 at the ends, so the rescaled
    // values never escape [x_min, x_max] even in floating point
    double ratio = (w[i] - w_min) / (w_max - w_min);
    out[i] = (x_max - x_min) * ratio + x_min;
  }
  return out;
}

inline Vec prior_weight_pipeline(const std::vector<std::size_t>& labels,
                                 std::size_t n_classes, double x_min,
                                 double x_max) {
  return rescale_weights(inverse_ratio_weights(estimate_priors(labels,
                                                               n_classes)),
                         x_min, x_max);
}

// Runs the priors -> inverse-ratio -> rescale pipeline independently for
// encodings, families and languages. Every class must be observed.
inline WeightTable build_weight_table(const Dataset& ds, double x_min = 0.1,
                                      double x_max = 8.0) {
  if (ds.samples.empty()) fail_input("build_weight_table: empty dataset");
  WeightTable table;
  table.x_min = x_min;
  table.x_max = x_max;
  const Taxonomy& t = ds.taxonomy;
  auto pipeline = [&](const std::vector<std::size_t>& labels,
                      std::size_t n_classes, const char* axis,
                      const std::vector<std::string>& names) {
    Vec priors = estimate_priors(labels, n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
      if (priors[c] <= 0.0)
        fail_input("build_weight_table: ", axis, " '", names[c],
                   "' never appears in the dataset");
    return rescale_weights(inverse_ratio_weights(priors), x_min, x_max);
  };
  table.w_encoding = pipeline(encoding_labels(ds), t.n_encodings(),
                              "encoding", t.encodings);
  table.w_cluster = pipeline(family_labels(ds), t.n_families(), "family",
                             t.families);
  table.w_language = pipeline(language_labels(ds), t.n_languages(),
                              "language", t.languages);
  return table;
}

// All-ones table: with it, the weighted objective reduces to plain mean
// cross-entropy (the "no BCE" setting).
inline WeightTable uniform_table(const Taxonomy& t, double x_min = 0.1,
                                 double x_max = 8.0) {
  WeightTable table;
  table.x_min = x_min;
  table.x_max = x_max;
  table.w_encoding.assign(t.n_encodings(), 1.0);
  table.w_cluster.assign(t.n_families(), 1.0);
  table.w_language.assign(t.n_languages(), 1.0);
  return table;
}

// Per-example task weights: W_F = W_encoding + W_cluster,
// W_L = W_encoding + W_language.
inline std::pair<Vec, Vec> example_weights(
    const WeightTable& table, const std::vector<std::size_t>& enc_labels,
    const std::vector<std::size_t>& fam_labels,
    const std::vector<std::size_t>& lang_labels) {
  std::size_t n = enc_labels.size();
  if (fam_labels.size() != n || lang_labels.size() != n)
    fail_input("example_weights: label vectors have different lengths");
  Vec w_fam(n), w_lang(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (enc_labels[i] >= table.w_encoding.size())
      fail_input("example_weights: encoding label ", enc_labels[i],
                 " out of range [0, ", table.w_encoding.size(), ")");
    if (fam_labels[i] >= table.w_cluster.size())
      fail_input("example_weights: family label ", fam_labels[i],
                 " out of range [0, ", table.w_cluster.size(), ")");
    if (lang_labels[i] >= table.w_language.size())
      fail_input("example_weights: language label ", lang_labels[i],
                 " out of range [0, ", table.w_language.size(), ")");
    double we = table.w_encoding[enc_labels[i]];
    w_fam[i] = we + table.w_cluster[fam_labels[i]];
    w_lang[i] = we + table.w_language[lang_labels[i]];
  }
  return {std::move(w_fam), std::move(w_lang)};
}

namespace detail {

// Mini-batch variant of the prior pipeline: statistics over the classes
// present in the batch only, then a per-example lookup.
inline Vec minibatch_axis_weights(const std::vector<std::size_t>& labels,
                                  double x_min, double x_max) {
  if (labels.empty()) fail_input("batch_weights: empty batch");
  std::vector<std::size_t> present;  // ascending class ids in the batch
  for (std::size_t y : labels)
    if (std::find(present.begin(), present.end(), y) == present.end())
      present.push_back(y);
  std::sort(present.begin(), present.end());
  Vec counts(present.size(), 0.0);
  for (std::size_t y : labels) {
    std::size_t slot =
        std::lower_bound(present.begin(), present.end(), y) - present.begin();
    counts[slot] += 1.0;
  }
  for (double& c : counts) c /= double(labels.size());
  Vec w = rescale_weights(inverse_ratio_weights(counts), x_min, x_max);
  Vec per_example(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t slot = std::lower_bound(present.begin(), present.end(),
                                        labels[i]) -
                       present.begin();
    per_example[i] = w[slot];
  }
  return per_example;
}

}  // namespace detail

// Per-example (w_fam, w_lang) for a batch. Global mode reads the
// precomputed table; MiniBatch mode recomputes priors from the batch.
inline std::pair<Vec, Vec> batch_weights(
    PriorMode mode, const WeightTable& table,
    const std::vector<std::size_t>& enc_labels,
    const std::vector<std::size_t>& fam_labels,
    const std::vector<std::size_t>& lang_labels) {
  if (mode == PriorMode::Global)
    return example_weights(table, enc_labels, fam_labels, lang_labels);
  Vec we = detail::minibatch_axis_weights(enc_labels, table.x_min,
                                          table.x_max);
  Vec wf = detail::minibatch_axis_weights(fam_labels, table.x_min,
                                          table.x_max);
  Vec wl = detail::minibatch_axis_weights(lang_labels, table.x_min,
                                          table.x_max);
  std::size_t n = enc_labels.size();
  Vec w_fam(n), w_lang(n);
  for (std::size_t i = 0; i < n; ++i) {
    w_fam[i] = we[i] + wf[i];
    w_lang[i] = we[i] + wl[i];
  }
  return {std::move(w_fam), std::move(w_lang)};
}

// Reference loss: cross-entropy with each term divided by its class prior,
// D = -(1/(K n)) sum_i log(p_i[y_i]) / Pr(y_i).
inline double bce_loss(const Matrix& probs,
                       const std::vector<std::size_t>& labels,
                       const Vec& priors, std::size_t n_classes) {
  if (n_classes == 0 || probs.cols != n_classes)
    fail_input("bce_loss: probs have ", probs.cols, " columns, expected ",
               n_classes);
  if (labels.size() != probs.rows)
    fail_input("bce_loss: ", labels.size(), " labels for ", probs.rows,
               " rows");
  if (priors.size() != n_classes)
    fail_input("bce_loss: priors size ", priors.size(), " != ", n_classes);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t y = labels[i];
    if (y >= n_classes)
      fail_input("bce_loss: label ", y, " out of range [0, ", n_classes, ")");
    if (priors[y] <= 0.0)
      fail_input("bce_loss: zero prior for present class ", y);
    total += std::log(probs(i, y)) / priors[y];
  }
  return -total / (double(n_classes) * double(labels.size()));
}

}  // namespace lidkit
