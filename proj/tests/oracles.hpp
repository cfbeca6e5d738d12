// Test-only oracles, kept independent of the implementation paths they
// check: plain-loop matrix product, central finite differences, the
// grouped-concatenation logit combination, and a trial-by-trial detection
// cost accounting.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lidkit/haus.hpp"
#include "lidkit/linalg.hpp"
#include "lidkit/taxonomy.hpp"

namespace oracles {

inline lidkit::Matrix matmul_plain(const lidkit::Matrix& A,
                                   const lidkit::Matrix& B) {
  lidkit::Matrix C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < B.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < A.cols; ++k) s += A(i, k) * B(k, j);
      C(i, j) = s;
    }
  return C;
}

// Central finite differences of a scalar function of a flat vector.
inline lidkit::Vec fd_gradient(
    const std::function<double(const lidkit::Vec&)>& f, lidkit::Vec params,
    double h = 1e-5) {
  lidkit::Vec grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    double orig = params[i];
    params[i] = orig + h;
    double up = f(params);
    params[i] = orig - h;
    double down = f(params);
    params[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double max_rel_error(const lidkit::Vec& a, const lidkit::Vec& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), floor});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Eq.-style grouped construction: concatenate per-family blocks of
// (language logit + family logit) in block order, then un-permute back to
// language order.
inline lidkit::Vec combine_grouped(const lidkit::Vec& lang_logits,
                                   const lidkit::Vec& fam_logits,
                                   const lidkit::Taxonomy& t) {
  std::vector<double> concatenated;
  std::vector<std::size_t> source_language;
  for (const auto& [fam, members] : lidkit::family_blocks(t)) {
    for (std::size_t lang : members) {
      concatenated.push_back(lang_logits[lang] + fam_logits[fam]);
      source_language.push_back(lang);
    }
  }
  lidkit::Vec out(lang_logits.size());
  for (std::size_t pos = 0; pos < concatenated.size(); ++pos)
    out[source_language[pos]] = concatenated[pos];
  return out;
}

// Independent detection-cost accounting: for every (target, trial) pair,
// recompute the LLR decision and tally misses and false accepts into
// per-pair tables before applying the cost formula.
inline double detection_cost_accounting(const lidkit::Matrix& scores,
                                        const std::vector<std::size_t>& labels,
                                        double p_target) {
  std::size_t n = scores.rows, k = scores.cols;
  std::vector<std::size_t> trials(k, 0);
  for (std::size_t y : labels) ++trials[y];
  double threshold = std::log((1.0 - p_target) / p_target);
  // decision[target][trial]
  std::vector<std::vector<bool>> accept(k, std::vector<bool>(n, false));
  for (std::size_t target = 0; target < k; ++target)
    for (std::size_t i = 0; i < n; ++i) {
      double p = scores(i, target);
      double rest = 1.0 - p;
      double llr;
      if (p <= 0.0)
        llr = -std::numeric_limits<double>::infinity();
      else if (rest <= 0.0)
        llr = std::numeric_limits<double>::infinity();
      else
        llr = std::log(p * double(k - 1) / rest);
      accept[target][i] = llr > threshold;
    }
  double cost_sum = 0.0;
  std::size_t included = 0;
  for (std::size_t target = 0; target < k; ++target) {
    if (trials[target] == 0) continue;
    std::size_t miss = 0;
    std::vector<std::size_t> fa(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == target) {
        if (!accept[target][i]) ++miss;
      } else if (accept[target][i]) {
        ++fa[labels[i]];
      }
    }
    double p_miss = double(miss) / double(trials[target]);
    double fa_sum = 0.0;
    for (std::size_t other = 0; other < k; ++other) {
      if (other == target || trials[other] == 0) continue;
      fa_sum += double(fa[other]) / double(trials[other]);
    }
    cost_sum += p_target * p_miss + (1.0 - p_target) / double(k - 1) * fa_sum;
    ++included;
  }
  return cost_sum / double(included);
}

}  // namespace oracles
