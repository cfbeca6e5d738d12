#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/linalg.hpp"
#include "lidkit/net.hpp"
#include "lidkit/taxonomy.hpp"

namespace lidkit {

enum class MultitaskMode { Single, Hard, Haus };

inline const char* to_string(MultitaskMode m) {
  switch (m) {
    case MultitaskMode::Single: return "single";
    case MultitaskMode::Hard: return "hard";
    default: return "haus";
  }
}

// Two-head network: shared trunk, shallow family branch, deeper language
// branch. With couple_logits set, each family logit is added to the logits
// of its member languages before the language softmax; family labels are
// consumed only by the loss, never at inference.
//
// The trunk may be empty (features feed the branches directly, which is
// how the MCLR baseline is expressed) and the family branch may be absent
// (single-task variant).
struct HausModel {
  Mlp trunk;            // relu_on_output = true when nonempty
  Mlp family_branch;    // empty => single-task model
  Mlp language_branch;
  bool couple_logits = true;
  Taxonomy taxonomy;
  double eta = 0.6;
};

inline bool has_family_head(const HausModel& m) {
  return !m.family_branch.layers.empty();
}

inline std::size_t input_dim(const HausModel& m) {
  return m.trunk.layers.empty() ? m.language_branch.in_dim()
                                : m.trunk.in_dim();
}

inline void validate(const HausModel& m) {
  validate(m.taxonomy);
  validate(m.trunk);
  validate(m.family_branch);
  validate(m.language_branch);
  if (m.language_branch.layers.empty())
    fail_input("haus model: language branch has no layers");
  if (m.language_branch.out_dim() != m.taxonomy.n_languages())
    fail_input("haus model: language branch emits ",
               m.language_branch.out_dim(), " logits, taxonomy has ",
               m.taxonomy.n_languages(), " languages");
  if (has_family_head(m) &&
      m.family_branch.out_dim() != m.taxonomy.n_families())
    fail_input("haus model: family branch emits ", m.family_branch.out_dim(),
               " logits, taxonomy has ", m.taxonomy.n_families(),
               " families");
  if (!m.trunk.layers.empty()) {
    if (m.language_branch.in_dim() != m.trunk.out_dim())
      fail_input("haus model: language branch input ",
                 m.language_branch.in_dim(), " != trunk output ",
                 m.trunk.out_dim());
    if (has_family_head(m) && m.family_branch.in_dim() != m.trunk.out_dim())
      fail_input("haus model: family branch input ",
                 m.family_branch.in_dim(), " != trunk output ",
                 m.trunk.out_dim());
  } else if (has_family_head(m) &&
             m.family_branch.in_dim() != m.language_branch.in_dim()) {
    fail_input("haus model: branch input dims differ without a trunk");
  }
  if (m.eta < 0.0 || m.eta > 1.0)
    fail_input("haus model: eta ", m.eta, " outside [0, 1]");
  if (m.couple_logits && !has_family_head(m))
    fail_input("haus model: logit coupling requires a family branch");
}

// output[i] = lang_logits[i] + fam_logits[family_of(i)]. The grouped
// concatenation form builds the same sums family block by family block and
// un-permutes; both orders add the identical pair of doubles per slot, so
// the results agree exactly.
inline Vec combine_logits(const Vec& lang_logits, const Vec& fam_logits,
                          const Taxonomy& t) {
  if (lang_logits.size() != t.n_languages())
    fail_input("combine_logits: ", lang_logits.size(), " language logits, ",
               "taxonomy has ", t.n_languages());
  if (fam_logits.size() != t.n_families())
    fail_input("combine_logits: ", fam_logits.size(), " family logits, ",
               "taxonomy has ", t.n_families());
  Vec out(lang_logits.size());
  for (std::size_t l = 0; l < lang_logits.size(); ++l)
    out[l] = lang_logits[l] + fam_logits[t.lang_to_family[l]];
  return out;
}

inline Matrix combine_logits_rows(const Matrix& lang_logits,
                                  const Matrix& fam_logits,
                                  const Taxonomy& t) {
  if (lang_logits.cols != t.n_languages() ||
      fam_logits.cols != t.n_families() ||
      lang_logits.rows != fam_logits.rows)
    fail_input("combine_logits: batch shapes do not match taxonomy");
  Matrix out(lang_logits.rows, lang_logits.cols);
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t l = 0; l < out.cols; ++l)
      out(r, l) = lang_logits(r, l) + fam_logits(r, t.lang_to_family[l]);
  return out;
}

// Batched head outputs. For single-task models the family matrices are
// empty and combined_logits equals language_logits.
struct HausOutput {
  Matrix family_logits;
  Matrix language_logits;
  Matrix combined_logits;
  Matrix family_post;
  Matrix language_post;
};

namespace detail {

struct HausTrace {
  Activations trunk_acts;
  Activations family_acts;
  Activations language_acts;
  HausOutput out;
};

inline HausTrace haus_forward_trace(const HausModel& m, const Matrix& x) {
  HausTrace tr;
  tr.trunk_acts = forward(m.trunk, x);
  const Matrix& h = tr.trunk_acts.output();
  tr.language_acts = forward(m.language_branch, h);
  tr.out.language_logits = tr.language_acts.output();
  if (has_family_head(m)) {
    tr.family_acts = forward(m.family_branch, h);
    tr.out.family_logits = tr.family_acts.output();
    tr.out.family_post = softmax_rows(tr.out.family_logits);
    tr.out.combined_logits =
        m.couple_logits
            ? combine_logits_rows(tr.out.language_logits,
                                  tr.out.family_logits, m.taxonomy)
            : tr.out.language_logits;
  } else {
    tr.out.combined_logits = tr.out.language_logits;
  }
  tr.out.language_post = softmax_rows(tr.out.combined_logits);
  return tr;
}

}  // namespace detail

inline HausOutput haus_forward(const HausModel& m, const Matrix& x) {
  return detail::haus_forward_trace(m, x).out;
}

// Weighted-mean negative log-likelihood: sum_i w_i * (-log p_i[y_i]) / sum_i w_i.
inline double weighted_nll(const Matrix& post,
                           const std::vector<std::size_t>& labels,
                           const Vec& weights) {
  if (labels.size() != post.rows || weights.size() != post.rows)
    fail_input("weighted_nll: ", post.rows, " rows but ", labels.size(),
               " labels and ", weights.size(), " weights");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= post.cols)
      fail_input("weighted_nll: label ", labels[i], " out of range [0, ",
                 post.cols, ")");
    if (!(weights[i] > 0.0))
      fail_input("weighted_nll: nonpositive weight ", weights[i],
                 " at example ", i);
    num += weights[i] * -std::log(post(i, labels[i]));
    den += weights[i];
  }
  return num / den;
}

inline void check_family_labels(const Taxonomy& t,
                                const std::vector<std::size_t>& y_lang,
                                const std::vector<std::size_t>& y_fam) {
  if (y_fam.size() != y_lang.size())
    fail_input("joint loss: ", y_lang.size(), " language labels but ",
               y_fam.size(), " family labels");
  for (std::size_t i = 0; i < y_lang.size(); ++i)
    if (y_fam[i] != family_of(t, y_lang[i]))
      fail_input("joint loss: example ", i, " has family label ", y_fam[i],
                 " but language ", y_lang[i], " belongs to family ",
                 family_of(t, y_lang[i]));
}

// eta * D(y_fam) + (1 - eta) * D(y_lang), both terms weighted-mean NLL.
inline double joint_loss(const HausOutput& out, const Taxonomy& t,
                         const std::vector<std::size_t>& y_lang,
                         const std::vector<std::size_t>& y_fam, double eta,
                         const Vec& w_fam, const Vec& w_lang) {
  if (eta < 0.0 || eta > 1.0)
    fail_input("joint loss: eta ", eta, " outside [0, 1]");
  if (out.family_post.rows == 0)
    fail_input("joint loss: output carries no family posteriors");
  check_family_labels(t, y_lang, y_fam);
  double fam_term = weighted_nll(out.family_post, y_fam, w_fam);
  double lang_term = weighted_nll(out.language_post, y_lang, w_lang);
  return eta * fam_term + (1.0 - eta) * lang_term;
}

// Loss actually trained by a model variant: the joint objective when a
// family head exists, otherwise the plain language term.
inline double model_loss(const HausModel& m, const HausOutput& out,
                         const std::vector<std::size_t>& y_lang,
                         const std::vector<std::size_t>& y_fam,
                         const Vec& w_fam, const Vec& w_lang) {
  if (has_family_head(m))
    return joint_loss(out, m.taxonomy, y_lang, y_fam, m.eta, w_fam, w_lang);
  return weighted_nll(out.language_post, y_lang, w_lang);
}

struct HausGradients {
  GradientBundle trunk;
  GradientBundle family;
  GradientBundle language;
};

struct HausBackwardResult {
  double loss = 0.0;
  HausGradients grads;
};

// Exact gradients of the joint loss. The family branch receives both the
// direct family-loss term and, through the logit combination, the summed
// combined-logit gradients of its member languages.
inline HausBackwardResult haus_backward(const HausModel& m, const Matrix& x,
                                        const std::vector<std::size_t>& y_lang,
                                        const std::vector<std::size_t>& y_fam,
                                        double eta, const Vec& w_fam,
                                        const Vec& w_lang) {
  detail::HausTrace tr = detail::haus_forward_trace(m, x);
  const std::size_t n = x.rows;
  const bool family = has_family_head(m);
  HausBackwardResult res;
  if (family)
    res.loss = joint_loss(tr.out, m.taxonomy, y_lang, y_fam, eta, w_fam,
                          w_lang);
  else
    res.loss = weighted_nll(tr.out.language_post, y_lang, w_lang);

  double lang_scale = family ? (1.0 - eta) : 1.0;
  double w_lang_sum = 0.0;
  for (double w : w_lang) w_lang_sum += w;

  // d loss / d combined logits
  Matrix g_comb(n, m.taxonomy.n_languages());
  for (std::size_t i = 0; i < n; ++i) {
    double coef = lang_scale * w_lang[i] / w_lang_sum;
    for (std::size_t c = 0; c < g_comb.cols; ++c) {
      double p = tr.out.language_post(i, c);
      g_comb(i, c) = coef * (p - (y_lang[i] == c ? 1.0 : 0.0));
    }
  }

  Matrix h_grad;  // gradient wrt trunk output
  {
    BackwardResult lang_back =
        backward(m.language_branch, tr.language_acts, g_comb);
    res.grads.language = std::move(lang_back.grads);
    h_grad = std::move(lang_back.input_grad);
  }

  if (family) {
    double w_fam_sum = 0.0;
    for (double w : w_fam) w_fam_sum += w;
    Matrix g_fam(n, m.taxonomy.n_families());
    for (std::size_t i = 0; i < n; ++i) {
      double coef = eta * w_fam[i] / w_fam_sum;
      for (std::size_t c = 0; c < g_fam.cols; ++c) {
        double p = tr.out.family_post(i, c);
        g_fam(i, c) = coef * (p - (y_fam[i] == c ? 1.0 : 0.0));
      }
    }
    if (m.couple_logits) {
      // coupling path of the logit combination
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < m.taxonomy.n_languages(); ++l)
          g_fam(i, m.taxonomy.lang_to_family[l]) += g_comb(i, l);
    }
    BackwardResult fam_back = backward(m.family_branch, tr.family_acts, g_fam);
    res.grads.family = std::move(fam_back.grads);
    for (std::size_t i = 0; i < h_grad.a.size(); ++i)
      h_grad.a[i] += fam_back.input_grad.a[i];
  }

  BackwardResult trunk_back = backward(m.trunk, tr.trunk_acts, h_grad);
  res.grads.trunk = std::move(trunk_back.grads);
  return res;
}

struct Prediction {
  std::size_t language = 0;
  std::size_t family = 0;
};

inline std::size_t argmax_row(const Matrix& m, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < m.cols; ++c)
    if (m(row, c) > m(row, best)) best = c;  // ties keep the lowest index
  return best;
}

// Self-attentive inference: no family labels are consumed; the family
// prediction is reported from its own head (it may disagree with the
// family of the predicted language).
inline std::vector<Prediction> predict(const HausModel& m, const Matrix& x) {
  HausOutput out = haus_forward(m, x);
  std::vector<Prediction> preds(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    preds[i].language = argmax_row(out.language_post, i);
    preds[i].family = has_family_head(m)
                          ? argmax_row(out.family_post, i)
                          : m.taxonomy.lang_to_family[preds[i].language];
  }
  return preds;
}

// --- parameter plumbing (shared by the optimizer and checkpoints) ---

inline std::size_t param_count(const HausModel& m) {
  return param_count(m.trunk) + param_count(m.family_branch) +
         param_count(m.language_branch);
}

// Order: trunk, family branch, language branch; per layer weights
// row-major then bias. Checkpoint files use exactly this order.
inline Vec flatten_params(const HausModel& m) {
  Vec flat;
  flat.reserve(param_count(m));
  append_params(m.trunk, flat);
  append_params(m.family_branch, flat);
  append_params(m.language_branch, flat);
  return flat;
}

inline void unflatten_params(HausModel& m, const Vec& flat) {
  if (flat.size() != param_count(m))
    fail_input("haus model: parameter vector has ", flat.size(),
               " entries, model needs ", param_count(m));
  std::size_t cursor = 0;
  read_params(m.trunk, flat, cursor);
  read_params(m.family_branch, flat, cursor);
  read_params(m.language_branch, flat, cursor);
}

inline Vec flatten_grads(const HausGradients& g, std::size_t expected) {
  Vec flat;
  flat.reserve(expected);
  append_grads(g.trunk, flat);
  append_grads(g.family, flat);
  append_grads(g.language, flat);
  return flat;
}

// --- construction ---

struct HausLayout {
  std::size_t input_dim = 0;
  std::vector<std::size_t> trunk_hidden;     // empty => no trunk
  std::vector<std::size_t> family_hidden;    // hidden sizes before |F| logits
  std::vector<std::size_t> language_hidden;  // hidden sizes before |L| logits
  bool staircase = true;  // assert family depth <= language depth
};

inline HausModel make_haus_model(const Taxonomy& taxonomy,
                                 const HausLayout& layout, MultitaskMode mode,
                                 double eta, std::uint64_t seed) {
  validate(taxonomy);
  if (layout.input_dim == 0) fail_input("haus layout: zero input dim");
  if (eta < 0.0 || eta > 1.0)
    fail_input("haus layout: eta ", eta, " outside [0, 1]");
  if (eta < 0.5 && mode != MultitaskMode::Single)
    log_warn("eta = ", eta,
             " < 0.5; the family task is weighted below the language task");
  if (layout.staircase && mode != MultitaskMode::Single &&
      layout.family_hidden.size() > layout.language_hidden.size())
    fail_input("haus layout: staircase profile requires family depth <= ",
               "language depth (got ", layout.family_hidden.size() + 1,
               " > ", layout.language_hidden.size() + 1, " layers)");
  HausModel m;
  m.taxonomy = taxonomy;
  m.eta = eta;
  m.couple_logits = (mode == MultitaskMode::Haus);
  std::size_t rep_dim = layout.input_dim;
  if (!layout.trunk_hidden.empty()) {
    std::vector<std::size_t> dims{layout.input_dim};
    dims.insert(dims.end(), layout.trunk_hidden.begin(),
                layout.trunk_hidden.end());
    m.trunk = init(dims, sub_seed(seed, "trunk"), /*relu_on_output=*/true);
    rep_dim = layout.trunk_hidden.back();
  }
  if (mode != MultitaskMode::Single) {
    std::vector<std::size_t> dims{rep_dim};
    dims.insert(dims.end(), layout.family_hidden.begin(),
                layout.family_hidden.end());
    dims.push_back(taxonomy.n_families());
    m.family_branch = init(dims, sub_seed(seed, "family"));
  }
  {
    std::vector<std::size_t> dims{rep_dim};
    dims.insert(dims.end(), layout.language_hidden.begin(),
                layout.language_hidden.end());
    dims.push_back(taxonomy.n_languages());
    m.language_branch = init(dims, sub_seed(seed, "language"));
  }
  validate(m);
  return m;
}

}  // namespace lidkit
