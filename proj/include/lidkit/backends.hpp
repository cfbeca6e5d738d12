#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/data.hpp"
#include "lidkit/haus.hpp"
#include "lidkit/linalg.hpp"
#include "lidkit/taxonomy.hpp"

namespace lidkit {

// x -> m * (x - mean); mean may be absent (pure linear map).
struct LinearTransform {
  Matrix m;  // out_dim x in_dim
  Vec mean;  // empty => no centering

  std::size_t in_dim() const { return m.cols; }
  std::size_t out_dim() const { return m.rows; }

  Vec operator()(const Vec& x) const {
    if (x.size() != in_dim())
      fail_input("transform: input dim ", x.size(), " != ", in_dim());
    if (mean.empty()) return matvec(m, x);
    Vec centered(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean[i];
    return matvec(m, centered);
  }
};

inline Matrix apply_rows(const LinearTransform& t, const Matrix& X) {
  if (X.cols != t.in_dim())
    fail_input("transform: input dim ", X.cols, " != ", t.in_dim());
  Matrix C = X;
  if (!t.mean.empty())
    for (std::size_t r = 0; r < C.rows; ++r)
      for (std::size_t c = 0; c < C.cols; ++c) C(r, c) -= t.mean[c];
  return matmul_nt(C, t.m);
}

inline Matrix apply_chain(const std::vector<LinearTransform>& chain,
                          const Matrix& X) {
  Matrix cur = X;
  for (const LinearTransform& t : chain) cur = apply_rows(t, cur);
  return cur;
}

// --- cosine scoring ---

struct CentroidModel {
  Matrix centroids;  // n_languages x dim, mean of raw training vectors
};

inline double cosine_score(const Vec& test, const Vec& target) {
  if (test.size() != target.size())
    fail_input("cosine_score: dims differ (", test.size(), " vs ",
               target.size(), ")");
  double nt = norm2(test), ng = norm2(target);
  if (nt == 0.0 || ng == 0.0)
    fail_input("cosine_score: zero-norm vector");
  return dot(test, target) / (nt * ng);
}

inline CentroidModel fit_centroids(const Dataset& ds) {
  std::size_t k = ds.taxonomy.n_languages();
  CentroidModel model;
  model.centroids = Matrix(k, ds.dim);
  std::vector<std::size_t> counts(k, 0);
  for (const Sample& s : ds.samples) {
    ++counts[s.language];
    for (std::size_t j = 0; j < ds.dim; ++j)
      model.centroids(s.language, j) += s.features[j];
  }
  for (std::size_t l = 0; l < k; ++l) {
    if (counts[l] == 0)
      fail_input("fit_centroids: language '", ds.taxonomy.languages[l],
                 "' has no training samples");
    for (std::size_t j = 0; j < ds.dim; ++j)
      model.centroids(l, j) /= double(counts[l]);
  }
  return model;
}

inline std::size_t classify_cosine(const CentroidModel& model, const Vec& x) {
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t l = 0; l < model.centroids.rows; ++l) {
    Vec c(model.centroids.row(l), model.centroids.row(l) + model.centroids.cols);
    double score = cosine_score(x, c);
    if (score > best_score) {  // ties keep the lowest index
      best_score = score;
      best = l;
    }
  }
  return best;
}

// --- scatter helpers ---

namespace detail {

inline Vec column_mean(const Matrix& X) {
  Vec mu(X.cols, 0.0);
  for (std::size_t r = 0; r < X.rows; ++r)
    for (std::size_t c = 0; c < X.cols; ++c) mu[c] += X(r, c);
  for (double& v : mu) v /= double(X.rows);
  return mu;
}

// lambda = 1e-6 * min(1, trace/d): proportional protection for
// small-scale data, capped at an absolute 1e-6 so whitening residuals
// stay below the 1e-6 self-consistency tolerance on ordinary data.
inline double reg_lambda(const Matrix& S, double rel = 1e-6) {
  double tr = 0.0;
  for (std::size_t i = 0; i < S.rows; ++i) tr += S(i, i);
  double scale = tr / double(S.rows);
  if (scale <= 0.0) return rel;
  return rel * std::min(1.0, scale);
}

}  // namespace detail

// Mean within-class covariance over languages: (1/C) sum_c cov_c with
// cov_c the per-language population covariance.
inline Matrix within_class_covariance(const Dataset& ds) {
  std::size_t k = ds.taxonomy.n_languages();
  std::size_t d = ds.dim;
  std::vector<Vec> means(k, Vec(d, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (const Sample& s : ds.samples) {
    ++counts[s.language];
    for (std::size_t j = 0; j < d; ++j) means[s.language][j] += s.features[j];
  }
  std::size_t present = 0;
  for (std::size_t l = 0; l < k; ++l)
    if (counts[l] > 0) {
      ++present;
      for (double& v : means[l]) v /= double(counts[l]);
    }
  if (present == 0) fail_input("wccn: empty dataset");
  Matrix W(d, d);
  for (const Sample& s : ds.samples) {
    const Vec& mu = means[s.language];
    for (std::size_t i = 0; i < d; ++i) {
      double di = (s.features[i] - mu[i]) / double(counts[s.language]);
      for (std::size_t j = 0; j < d; ++j)
        W(i, j) += di * (s.features[j] - mu[j]);
    }
  }
  for (double& v : W.a) v /= double(present);
  return W;
}

// Whitening transform from the Cholesky factor of the inverse mean
// within-class covariance; x -> B^T x makes that covariance the identity
// up to the regularization.
inline LinearTransform fit_wccn(const Dataset& ds) {
  Matrix W = within_class_covariance(ds);
  double lambda = detail::reg_lambda(W);
  for (std::size_t i = 0; i < W.rows; ++i) W(i, i) += lambda;
  Matrix L;
  try {
    L = cholesky(W);
  } catch (const NumericError& e) {
    fail_numeric("wccn: regularized covariance not positive definite "
                 "(lambda = ", lambda, "): ", e.what());
  }
  Matrix Linv = invert_lower(L);
  Matrix Minv = matmul_tn(Linv, Linv);  // (W + lambda I)^{-1}
  Matrix B = cholesky(Minv);
  LinearTransform t;
  t.m = transpose(B);  // rows of m are columns of B, so t(x) = B^T x
  return t;
}

// Regularized LDA via symmetric whitening: Cholesky of S_w, symmetric
// eigensolve of the whitened between-class scatter. Columns are scaled so
// w^T (S_w + lambda I) w = 1.
inline LinearTransform fit_lda(const Matrix& X,
                               const std::vector<std::size_t>& labels,
                               std::size_t n_classes, std::size_t out_dim) {
  if (X.rows == 0 || X.rows != labels.size())
    fail_input("fit_lda: bad inputs (", X.rows, " rows, ", labels.size(),
               " labels)");
  if (n_classes < 2) fail_input("fit_lda: need >= 2 classes");
  if (out_dim == 0 || out_dim > n_classes - 1)
    fail_input("fit_lda: out_dim ", out_dim, " outside [1, ", n_classes - 1,
               "] (rank of the between-class scatter)");
  std::size_t d = X.cols;
  Vec mu = detail::column_mean(X);
  std::vector<Vec> class_mean(n_classes, Vec(d, 0.0));
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t r = 0; r < X.rows; ++r) {
    std::size_t y = labels[r];
    if (y >= n_classes) fail_input("fit_lda: label ", y, " out of range");
    ++counts[y];
    for (std::size_t c = 0; c < d; ++c) class_mean[y][c] += X(r, c);
  }
  for (std::size_t y = 0; y < n_classes; ++y)
    if (counts[y] > 0)
      for (double& v : class_mean[y]) v /= double(counts[y]);
  Matrix Sw(d, d), Sb(d, d);
  for (std::size_t r = 0; r < X.rows; ++r) {
    const Vec& cm = class_mean[labels[r]];
    for (std::size_t i = 0; i < d; ++i) {
      double di = X(r, i) - cm[i];
      for (std::size_t j = 0; j < d; ++j) Sw(i, j) += di * (X(r, j) - cm[j]);
    }
  }
  for (std::size_t y = 0; y < n_classes; ++y) {
    if (counts[y] == 0) continue;
    for (std::size_t i = 0; i < d; ++i) {
      double di = class_mean[y][i] - mu[i];
      for (std::size_t j = 0; j < d; ++j)
        Sb(i, j) += double(counts[y]) * di * (class_mean[y][j] - mu[j]);
    }
  }
  double lambda = detail::reg_lambda(Sw);
  for (std::size_t i = 0; i < d; ++i) Sw(i, i) += lambda;
  Matrix L = cholesky(Sw);
  Matrix Linv = invert_lower(L);
  // A = L^{-1} S_b L^{-T}, symmetric
  Matrix A = matmul_nt(matmul(Linv, Sb), Linv);
  Vec eigenvalues;
  Matrix V;
  jacobi_eigen_sym(A, eigenvalues, V);
  // directions w = L^{-T} v for the top eigenvectors
  Matrix LinvT = transpose(Linv);
  LinearTransform t;
  t.m = Matrix(out_dim, d);
  for (std::size_t kcol = 0; kcol < out_dim; ++kcol) {
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = V(i, kcol);
    Vec w = matvec(LinvT, v);
    for (std::size_t i = 0; i < d; ++i) t.m(kcol, i) = w[i];
  }
  t.mean = mu;
  return t;
}

inline LinearTransform fit_lda(const Dataset& ds, std::size_t out_dim) {
  return fit_lda(feature_matrix(ds), language_labels(ds),
                 ds.taxonomy.n_languages(), out_dim);
}

// Mean-centered projection onto the top principal directions.
inline LinearTransform fit_pca(const Matrix& X, std::size_t out_dim) {
  if (X.rows == 0) fail_input("fit_pca: empty input");
  if (out_dim == 0 || out_dim > X.cols)
    fail_input("fit_pca: out_dim ", out_dim, " outside [1, ", X.cols, "]");
  std::size_t d = X.cols;
  Vec mu = detail::column_mean(X);
  Matrix C(d, d);
  for (std::size_t r = 0; r < X.rows; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      double di = X(r, i) - mu[i];
      for (std::size_t j = 0; j < d; ++j) C(i, j) += di * (X(r, j) - mu[j]);
    }
  for (double& v : C.a) v /= double(X.rows);
  Vec eigenvalues;
  Matrix V;
  jacobi_eigen_sym(C, eigenvalues, V);
  LinearTransform t;
  t.m = Matrix(out_dim, d);
  for (std::size_t kcol = 0; kcol < out_dim; ++kcol)
    for (std::size_t i = 0; i < d; ++i) t.m(kcol, i) = V(i, kcol);
  t.mean = mu;
  return t;
}

// Multi-class logistic regression: a single linear layer with softmax,
// expressed as a trunkless single-task model so the shared training loop
// and checkpoints apply unchanged.
inline HausModel mclr_build(const Taxonomy& taxonomy, std::size_t dim,
                            std::uint64_t seed) {
  HausLayout layout;
  layout.input_dim = dim;
  layout.staircase = false;
  return make_haus_model(taxonomy, layout, MultitaskMode::Single,
                         /*eta=*/0.0, seed);
}

// Writes projected coordinates plus the label names for every sample;
// columns: x0..x{k-1}, language, family, encoding.
inline void export_projection(const std::vector<LinearTransform>& chain,
                              const Dataset& ds, std::ostream& out) {
  Matrix P = apply_chain(chain, feature_matrix(ds));
  out << "# projection";
  for (std::size_t c = 0; c < P.cols; ++c) out << " x" << c;
  out << " language family encoding\n";
  for (std::size_t r = 0; r < P.rows; ++r) {
    for (std::size_t c = 0; c < P.cols; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", P(r, c));
      out << buf << "\t";
    }
    const Sample& s = ds.samples[r];
    out << ds.taxonomy.languages[s.language] << "\t"
        << ds.taxonomy.families[ds.taxonomy.lang_to_family[s.language]]
        << "\t" << ds.taxonomy.encodings[s.encoding] << "\n";
  }
}

inline void export_projection(const std::vector<LinearTransform>& chain,
                              const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_input("cannot open '", path, "' for writing");
  export_projection(chain, ds, out);
  if (!out) fail_input("write to '", path, "' failed");
}

}  // namespace lidkit
