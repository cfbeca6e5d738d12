#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lidkit/backends.hpp"
#include "lidkit/metrics.hpp"
#include "lidkit/optim.hpp"

using namespace lidkit;

namespace {

Taxonomy flat_taxonomy(std::size_t n_langs) {
  Taxonomy t;
  t.families = {"f"};
  for (std::size_t l = 0; l < n_langs; ++l) {
    t.languages.push_back(cat("l", l));
    t.lang_to_family.push_back(0);
  }
  t.encodings = {"e"};
  return t;
}

// deterministic dataset with exactly isotropic within-class scatter:
// per class, the four points mean +- a*e1, mean +- a*e2 (d = 2)
Dataset cross_pattern(const Vec& mean0, const Vec& mean1, double a) {
  Dataset ds;
  ds.dim = 2;
  ds.taxonomy = flat_taxonomy(2);
  auto add = [&](const Vec& mu, std::size_t lang) {
    for (std::size_t axis = 0; axis < 2; ++axis)
      for (double sign : {1.0, -1.0}) {
        Sample s;
        s.features = mu;
        s.features[axis] += sign * a;
        s.language = lang;
        s.encoding = 0;
        ds.samples.push_back(s);
      }
  };
  add(mean0, 0);
  add(mean1, 1);
  return ds;
}

Dataset gaussian_classes(std::size_t n_classes, std::size_t per_class,
                         std::size_t dim, double spread, double noise,
                         std::uint64_t seed) {
  Dataset ds;
  ds.dim = dim;
  ds.taxonomy = flat_taxonomy(n_classes);
  Rng rng(seed);
  std::vector<Vec> means(n_classes, Vec(dim));
  for (auto& m : means)
    for (double& v : m) v = rng.gaussian(0.0, spread);
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      Sample s;
      s.features.resize(dim);
      for (std::size_t j = 0; j < dim; ++j)
        s.features[j] = means[c][j] + rng.gaussian(0.0, noise);
      s.language = c;
      s.encoding = 0;
      ds.samples.push_back(s);
    }
  return ds;
}

}  // namespace

TEST_CASE("cosine_score") {
  Vec v = {0.5, -1.0, 2.0};
  CHECK(cosine_score(v, v) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cosine_score({1.0, 0.0}, {0.0, 3.0}) == doctest::Approx(0.0));
  CHECK(cosine_score({1.0, 0.0}, {1.0, 1.0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_score({0.0, 0.0}, {1.0, 0.0}), InputError);
  CHECK_THROWS_AS(cosine_score({1.0}, {1.0, 0.0}), InputError);
}

TEST_CASE("centroid classifier") {
  Dataset ds = gaussian_classes(4, 10, 6, 8.0, 0.0, 3);
  CentroidModel model = fit_centroids(ds);

  SUBCASE("test vector equal to a centroid picks that language") {
    for (std::size_t l = 0; l < 4; ++l) {
      Vec c(model.centroids.row(l), model.centroids.row(l) + 6);
      CHECK(classify_cosine(model, c) == l);
    }
  }

  SUBCASE("noiseless synthetic data classifies perfectly") {
    std::size_t hits = 0;
    for (const Sample& s : ds.samples)
      if (classify_cosine(model, s.features) == s.language) ++hits;
    CHECK(hits == ds.size());
  }

  SUBCASE("positive scaling leaves the decision unchanged") {
    Rng rng(9);
    for (int i = 0; i < 20; ++i) {
      Vec x(6);
      for (double& v : x) v = rng.gaussian();
      std::size_t base = classify_cosine(model, x);
      for (double c : {0.01, 0.5, 3.0, 1000.0}) {
        Vec scaled = x;
        for (double& v : scaled) v *= c;
        CHECK(classify_cosine(model, scaled) == base);
      }
    }
  }

  SUBCASE("missing language is an error") {
    Dataset missing = ds;
    std::erase_if(missing.samples,
                  [](const Sample& s) { return s.language == 2; });
    CHECK_THROWS_AS(fit_centroids(missing), InputError);
  }
}

TEST_CASE("WCCN whitens the mean within-class covariance") {
  SUBCASE("identity within-class covariance maps to ~identity transform") {
    // cross patterns give exactly isotropic per-class covariance a^2/2 * I
    Dataset ds = cross_pattern({0.0, 0.0}, {10.0, 0.0}, std::sqrt(2.0));
    LinearTransform t = fit_wccn(ds);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        CHECK(t.m(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-5));
  }

  SUBCASE("transformed within-class covariance is the identity") {
    Dataset ds = gaussian_classes(3, 40, 5, 6.0, 3.0, 11);
    LinearTransform t = fit_wccn(ds);
    Dataset transformed = ds;
    for (Sample& s : transformed.samples) s.features = t(s.features);
    Matrix W = within_class_covariance(transformed);
    Matrix I = Matrix::identity(5);
    double err = 0.0;
    for (std::size_t i = 0; i < W.a.size(); ++i)
      err += (W.a[i] - I.a[i]) * (W.a[i] - I.a[i]);
    CHECK(std::sqrt(err) < 1e-6);
  }

  SUBCASE("single sample per class forces the regularized identity") {
    Dataset ds = gaussian_classes(4, 1, 3, 5.0, 0.0, 13);
    LinearTransform t = fit_wccn(ds);
    double expected = 1.0 / std::sqrt(1e-6);  // lambda^{-1/2}
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        CHECK(t.m(i, j) ==
              doctest::Approx(i == j ? expected : 0.0).epsilon(1e-9));
  }
}

TEST_CASE("LDA finds the discriminant direction") {
  SUBCASE("two isotropic classes separated along x") {
    Dataset ds = cross_pattern({0.0, 0.0}, {6.0, 0.0}, 1.0);
    LinearTransform t = fit_lda(ds, 1);
    Vec dir = {t.m(0, 0), t.m(0, 1)};
    double angle = std::atan2(std::fabs(dir[1]), std::fabs(dir[0]));
    CHECK(angle < 1e-3);
  }

  SUBCASE("out_dim is capped at C - 1") {
    Dataset ds = cross_pattern({0.0, 0.0}, {6.0, 0.0}, 1.0);
    CHECK_THROWS_AS(fit_lda(ds, 2), InputError);
  }

  SUBCASE("projected class means keep their ordering") {
    Dataset ds = gaussian_classes(3, 30, 4, 10.0, 0.5, 17);
    LinearTransform t = fit_lda(ds, 2);
    Matrix P = apply_rows(t, feature_matrix(ds));
    // class means in projected space stay distinct
    std::vector<Vec> means(3, Vec(2, 0.0));
    std::vector<std::size_t> counts(3, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      ++counts[ds.samples[i].language];
      for (std::size_t j = 0; j < 2; ++j)
        means[ds.samples[i].language][j] += P(i, j);
    }
    for (std::size_t c = 0; c < 3; ++c)
      for (double& v : means[c]) v /= double(counts[c]);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = a + 1; b < 3; ++b) {
        double d = std::hypot(means[a][0] - means[b][0],
                              means[a][1] - means[b][1]);
        CHECK(d > 1.0);
      }
  }

  SUBCASE("separation ratio is invariant under invertible affine maps") {
    Dataset ds = gaussian_classes(3, 50, 4, 8.0, 1.0, 19);
    auto separation = [](const Dataset& d, std::size_t out_dim) {
      LinearTransform t = fit_lda(d, out_dim);
      Matrix P = apply_rows(t, feature_matrix(d));
      Dataset proj = d;
      proj.dim = out_dim;
      for (std::size_t i = 0; i < proj.samples.size(); ++i)
        proj.samples[i].features.assign(P.row(i), P.row(i) + out_dim);
      // trace ratio of between to within scatter in the projected space
      Matrix W = within_class_covariance(proj);
      Vec mu(out_dim, 0.0);
      std::vector<Vec> cms(d.taxonomy.n_languages(), Vec(out_dim, 0.0));
      std::vector<std::size_t> counts(d.taxonomy.n_languages(), 0);
      for (std::size_t i = 0; i < proj.size(); ++i) {
        ++counts[proj.samples[i].language];
        for (std::size_t j = 0; j < out_dim; ++j) {
          mu[j] += P(i, j);
          cms[proj.samples[i].language][j] += P(i, j);
        }
      }
      for (double& v : mu) v /= double(proj.size());
      double between = 0.0;
      for (std::size_t c = 0; c < cms.size(); ++c)
        for (std::size_t j = 0; j < out_dim; ++j) {
          double diff = cms[c][j] / double(counts[c]) - mu[j];
          between += double(counts[c]) * diff * diff;
        }
      double within = 0.0;
      for (std::size_t j = 0; j < out_dim; ++j) within += W(j, j);
      return between / within;
    };
    double base = separation(ds, 2);
    // apply a well-conditioned affine map
    Matrix A(4, 4);
    A.a = {1.2, 0.3, 0.0, 0.1,
           -0.2, 0.9, 0.1, 0.0,
           0.0, 0.2, 1.1, -0.3,
           0.1, 0.0, 0.2, 0.8};
    Dataset mapped = ds;
    for (Sample& s : mapped.samples) {
      Vec y = matvec(A, s.features);
      for (double& v : y) v += 2.5;
      s.features = y;
    }
    double after = separation(mapped, 2);
    CHECK(std::fabs(base - after) / base < 1e-6);
  }
}

TEST_CASE("PCA projects onto the principal directions") {
  SUBCASE("rank-1 data is explained by the first component") {
    Rng rng(23);
    Matrix X(40, 3);
    Vec dir = {1.0, -2.0, 0.5};
    for (std::size_t i = 0; i < 40; ++i) {
      double s = rng.gaussian(0.0, 3.0);
      for (std::size_t j = 0; j < 3; ++j) X(i, j) = s * dir[j];
    }
    LinearTransform t = fit_pca(X, 1);
    Matrix P = apply_rows(t, X);
    Vec mu(3, 0.0);
    for (std::size_t i = 0; i < 40; ++i)
      for (std::size_t j = 0; j < 3; ++j) mu[j] += X(i, j) / 40.0;
    double var_total = 0.0, var_proj = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
      for (std::size_t j = 0; j < 3; ++j)
        var_total += (X(i, j) - mu[j]) * (X(i, j) - mu[j]);
      var_proj += P(i, 0) * P(i, 0);
    }
    CHECK(var_proj / var_total > 0.999999);
  }

  SUBCASE("reconstruction error is nonincreasing in out_dim") {
    Rng rng(29);
    Matrix X(60, 5);
    for (double& v : X.a) v = rng.gaussian();
    double prev = 1e300;
    for (std::size_t k = 1; k <= 5; ++k) {
      LinearTransform t = fit_pca(X, k);
      Matrix P = apply_rows(t, X);
      // reconstruct: x_hat = mean + M^T p
      double err = 0.0;
      for (std::size_t i = 0; i < X.rows; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
          double xh = t.mean[j];
          for (std::size_t c = 0; c < k; ++c) xh += t.m(c, j) * P(i, c);
          err += (X(i, j) - xh) * (X(i, j) - xh);
        }
      CHECK(err <= prev + 1e-9);
      prev = err;
    }
    CHECK(prev < 1e-18);  // out_dim = d reconstructs exactly
  }

  SUBCASE("components are orthonormal") {
    Rng rng(31);
    Matrix X(80, 7);
    for (double& v : X.a) v = rng.gaussian();
    LinearTransform t = fit_pca(X, 7);
    for (std::size_t a = 0; a < 7; ++a)
      for (std::size_t b = 0; b < 7; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < 7; ++j) s += t.m(a, j) * t.m(b, j);
        CHECK(std::fabs(s - (a == b ? 1.0 : 0.0)) < 1e-10);
      }
  }

  SUBCASE("total variance is preserved at out_dim = d") {
    Rng rng(37);
    Matrix X(50, 4);
    for (double& v : X.a) v = rng.gaussian(0.0, 2.0);
    LinearTransform t = fit_pca(X, 4);
    Matrix P = apply_rows(t, X);
    Vec mu_p(4, 0.0);
    double var_x = 0.0, var_p = 0.0;
    Vec mu_x = Vec(4, 0.0);
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 4; ++j) mu_x[j] += X(i, j) / 50.0;
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        var_x += (X(i, j) - mu_x[j]) * (X(i, j) - mu_x[j]);
        var_p += P(i, j) * P(i, j);
      }
    CHECK(std::fabs(var_x - var_p) < 1e-9 * var_x);
  }

  SUBCASE("out_dim beyond d is rejected") {
    Matrix X(5, 2, 1.0);
    CHECK_THROWS_AS(fit_pca(X, 3), InputError);
  }
}

TEST_CASE("MCLR is an affine classifier trained by the shared loop") {
  // linearly separable two-class data
  Dataset ds;
  ds.dim = 2;
  ds.taxonomy = flat_taxonomy(2);
  Rng rng(41);
  for (int i = 0; i < 120; ++i) {
    Sample s;
    s.language = i % 2;
    double cx = s.language == 0 ? -2.0 : 2.0;
    s.features = {cx + rng.gaussian(0.0, 0.5), rng.gaussian(0.0, 0.5)};
    s.encoding = 0;
    ds.samples.push_back(s);
  }
  auto [train_ds, val_ds] = random_split(ds, 0.75, 5);
  HausModel mclr = mclr_build(ds.taxonomy, ds.dim, 43);
  CHECK(mclr.trunk.layers.empty());
  CHECK_FALSE(has_family_head(mclr));
  REQUIRE(mclr.language_branch.layers.size() == 1);

  SUBCASE("logits are affine in the input") {
    Matrix x(2, 2);
    x.a = {1.0, 2.0, -3.0, 0.5};
    Matrix x2 = x;
    for (double& v : x2.a) v *= 2.0;
    HausOutput o1 = haus_forward(mclr, x);
    HausOutput o2 = haus_forward(mclr, x2);
    const LinearLayer& layer = mclr.language_branch.layers[0];
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) {
        double affine = 2.0 * (o1.language_logits(r, c) - layer.bias[c]) +
                        layer.bias[c];
        CHECK(o2.language_logits(r, c) == doctest::Approx(affine));
      }
  }

  SUBCASE("training reaches 99% accuracy on separable data") {
    WeightTable table = uniform_table(ds.taxonomy);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 60;
    cfg.eta = 0.0;
    cfg.seed = 44;
    train(mclr, train_ds, val_ds, table, cfg);
    auto preds = predict(mclr, feature_matrix(train_ds));
    std::vector<std::size_t> labels = language_labels(train_ds);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i].language == labels[i]) ++hits;
    CHECK(double(hits) / double(labels.size()) >= 0.99);
  }
}

TEST_CASE("family-separable synthetic data is solved by nearest centroid") {
  // language_spread much smaller than family_spread, no noise: a centroid
  // classifier gets every family right
  SynthSpec spec;
  spec.n_families = 4;
  spec.langs_per_family = 3;
  spec.n_encodings = 1;
  spec.dim = 8;
  spec.family_spread = 10.0;
  spec.language_spread = 0.2;
  spec.encoding_shift = 0.0;
  spec.noise_sd = 0.0;
  spec.counts_per_class.assign(12, 5);
  spec.seed = 53;
  Dataset ds = gen_synthetic(spec);
  CentroidModel model = fit_centroids(ds);
  std::size_t family_hits = 0;
  for (const Sample& s : ds.samples) {
    std::size_t lang = classify_cosine(model, s.features);
    if (ds.taxonomy.lang_to_family[lang] ==
        ds.taxonomy.lang_to_family[s.language])
      ++family_hits;
  }
  CHECK(family_hits == ds.size());
}

TEST_CASE("export_projection writes one labeled row per sample") {
  Dataset ds = cross_pattern({0.0, 0.0}, {4.0, 0.0}, 1.0);
  LinearTransform ident;
  ident.m = Matrix::identity(2);

  std::ostringstream out;
  export_projection({ident}, ds, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "# projection x0 x1 language family encoding");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    if (rows == 1) {
      std::istringstream fields(line);
      double x0, x1;
      std::string lang, fam, enc;
      fields >> x0 >> x1 >> lang >> fam >> enc;
      CHECK(x0 == ds.samples[0].features[0]);
      CHECK(x1 == ds.samples[0].features[1]);
      CHECK(lang == "l0");
      CHECK(fam == "f");
      CHECK(enc == "e");
    }
  }
  CHECK(rows == ds.size());
}

TEST_CASE("PCA->LDA chain separates families in the export") {
  // hierarchical corpus with tight languages inside spread families
  SynthSpec spec;
  spec.n_families = 3;
  spec.langs_per_family = 2;
  spec.n_encodings = 1;
  spec.dim = 12;
  spec.family_spread = 10.0;
  spec.language_spread = 1.0;
  spec.encoding_shift = 0.0;
  spec.noise_sd = 0.5;
  spec.counts_per_class.assign(6, 30);
  spec.seed = 47;
  Dataset ds = gen_synthetic(spec);
  std::vector<LinearTransform> chain;
  chain.push_back(fit_pca(feature_matrix(ds), 6));
  Matrix reduced = apply_rows(chain[0], feature_matrix(ds));
  chain.push_back(fit_lda(reduced, language_labels(ds), 6, 2));
  Matrix P = apply_chain(chain, feature_matrix(ds));
  // between-family centroid distance exceeds within-family spread
  std::vector<Vec> fam_mean(3, Vec(2, 0.0));
  std::vector<std::size_t> counts(3, 0);
  std::vector<std::size_t> fams = family_labels(ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ++counts[fams[i]];
    for (std::size_t j = 0; j < 2; ++j) fam_mean[fams[i]][j] += P(i, j);
  }
  for (std::size_t f = 0; f < 3; ++f)
    for (double& v : fam_mean[f]) v /= double(counts[f]);
  double within = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    within += std::hypot(P(i, 0) - fam_mean[fams[i]][0],
                         P(i, 1) - fam_mean[fams[i]][1]);
  within /= double(ds.size());
  double between_min = 1e300;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      between_min = std::min(
          between_min, std::hypot(fam_mean[a][0] - fam_mean[b][0],
                                  fam_mean[a][1] - fam_mean[b][1]));
  CHECK(between_min > within);
}
