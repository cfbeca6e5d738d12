#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/linalg.hpp"
#include "lidkit/rng.hpp"
#include "lidkit/taxonomy.hpp"

namespace lidkit {

struct Sample {
  Vec features;
  std::size_t language = 0;
  std::size_t encoding = 0;
  std::optional<std::size_t> speaker;
};

// Immutable after load/generation; size() and dim stay in sync with
// the taxonomy's label spaces.
struct Dataset {
  Taxonomy taxonomy;
  std::vector<Sample> samples;
  std::size_t dim = 0;

  std::size_t size() const { return samples.size(); }
};

inline void validate(const Dataset& ds) {
  validate(ds.taxonomy);
  if (ds.dim == 0) fail_input("dataset: zero feature dimension");
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    if (s.features.size() != ds.dim)
      fail_input("dataset: sample ", i, " has ", s.features.size(),
                 " features, expected ", ds.dim);
    if (s.language >= ds.taxonomy.n_languages())
      fail_input("dataset: sample ", i, " language index ", s.language,
                 " out of range");
    if (s.encoding >= ds.taxonomy.n_encodings())
      fail_input("dataset: sample ", i, " encoding index ", s.encoding,
                 " out of range");
    if (s.speaker && *s.speaker >= ds.taxonomy.n_speakers())
      fail_input("dataset: sample ", i, " speaker index ", *s.speaker,
                 " out of range");
  }
}

inline std::vector<std::size_t> language_labels(const Dataset& ds) {
  std::vector<std::size_t> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds.samples[i].language;
  return y;
}

inline std::vector<std::size_t> family_labels(const Dataset& ds) {
  std::vector<std::size_t> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    y[i] = ds.taxonomy.lang_to_family[ds.samples[i].language];
  return y;
}

inline std::vector<std::size_t> encoding_labels(const Dataset& ds) {
  std::vector<std::size_t> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y[i] = ds.samples[i].encoding;
  return y;
}

inline Matrix feature_matrix(const Dataset& ds) {
  Matrix X(ds.size(), ds.dim);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.dim; ++j) X(i, j) = ds.samples[i].features[j];
  return X;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.taxonomy = ds.taxonomy;
  out.dim = ds.dim;
  out.samples.reserve(idx.size());
  for (std::size_t i : idx) out.samples.push_back(ds.samples[i]);
  return out;
}

// Unstratified split: the first part receives round(fraction * N) samples
// chosen by a seeded permutation; both parts keep the original sample order.
inline std::pair<Dataset, Dataset> random_split(const Dataset& ds,
                                                double fraction,
                                                std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    fail_input("random_split: fraction ", fraction, " outside [0, 1]");
  std::size_t n = ds.size();
  auto k = static_cast<std::size_t>(std::llround(fraction * double(n)));
  Rng rng(seed);
  std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<bool> in_first(n, false);
  for (std::size_t i = 0; i < k; ++i) in_first[perm[i]] = true;
  std::vector<std::size_t> first, second;
  for (std::size_t i = 0; i < n; ++i)
    (in_first[i] ? first : second).push_back(i);
  return {subset(ds, first), subset(ds, second)};
}

// Leave-one-speaker-out: per language, one held-out speaker for validation
// and a different one for test; everything else trains. Speakers already
// assigned to val/test in earlier repetitions can be excluded so repeated
// runs hold out fresh speakers.
inline std::tuple<Dataset, Dataset, Dataset> loso_split(
    const Dataset& ds, std::uint64_t seed,
    const std::set<std::size_t>& excluded_speakers = {}) {
  if (ds.taxonomy.speakers.empty())
    fail_input("loso_split: dataset has no speaker labels");
  std::size_t n_lang = ds.taxonomy.n_languages();
  std::vector<std::vector<std::size_t>> speakers_by_lang(n_lang);
  for (const Sample& s : ds.samples) {
    if (!s.speaker) fail_input("loso_split: sample without speaker id");
    auto& list = speakers_by_lang[s.language];
    if (std::find(list.begin(), list.end(), *s.speaker) == list.end())
      list.push_back(*s.speaker);
  }
  Rng rng(seed);
  std::vector<int> role(ds.taxonomy.n_speakers(), 0);  // 0 train, 1 val, 2 test
  for (std::size_t l = 0; l < n_lang; ++l) {
    auto& list = speakers_by_lang[l];
    std::sort(list.begin(), list.end());
    if (list.size() < 3)
      fail_input("loso_split: language '", ds.taxonomy.languages[l],
                 "' has ", list.size(), " speakers, need >= 3");
    std::vector<std::size_t> pool;
    for (std::size_t s : list)
      if (!excluded_speakers.count(s)) pool.push_back(s);
    if (pool.size() < 3) pool = list;  // not enough fresh speakers; reuse
    std::size_t vi = rng.index(pool.size());
    std::size_t ti = rng.index(pool.size() - 1);
    if (ti >= vi) ++ti;
    role[pool[vi]] = 1;
    role[pool[ti]] = 2;
  }
  std::vector<std::size_t> train_idx, val_idx, test_idx;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    switch (role[*ds.samples[i].speaker]) {
      case 1: val_idx.push_back(i); break;
      case 2: test_idx.push_back(i); break;
      default: train_idx.push_back(i);
    }
  }
  return {subset(ds, train_idx), subset(ds, val_idx), subset(ds, test_idx)};
}

// Synthetic hierarchical corpus: family centers, language means around
// them, a fixed per-encoding shift direction, optional per-speaker
// offsets, then isotropic Gaussian noise per sample.
struct SynthSpec {
  std::size_t n_families = 4;
  std::size_t langs_per_family = 3;
  std::size_t n_encodings = 2;
  std::size_t dim = 20;
  double family_spread = 6.0;
  double language_spread = 2.0;
  double encoding_shift = 2.5;
  double noise_sd = 1.0;
  // one entry per (language, encoding), language-major order
  std::vector<std::size_t> counts_per_class;
  std::uint64_t seed = 0;
  // optional speaker structure (for leave-one-speaker-out protocols)
  std::size_t speakers_per_language = 0;
  double speaker_spread = 0.0;
};

inline void validate(const SynthSpec& spec) {
  if (spec.n_families == 0 || spec.langs_per_family == 0 ||
      spec.n_encodings == 0 || spec.dim == 0)
    fail_input("synth spec: counts and dim must be positive");
  if (spec.family_spread < 0 || spec.language_spread < 0 ||
      spec.encoding_shift < 0 || spec.noise_sd < 0 || spec.speaker_spread < 0)
    fail_input("synth spec: spreads must be nonnegative");
  std::size_t n_lang = spec.n_families * spec.langs_per_family;
  if (spec.counts_per_class.size() != n_lang * spec.n_encodings)
    fail_input("synth spec: counts_per_class has ",
               spec.counts_per_class.size(), " entries, expected ",
               n_lang * spec.n_encodings);
}

inline Dataset gen_synthetic(const SynthSpec& spec) {
  validate(spec);
  std::size_t n_lang = spec.n_families * spec.langs_per_family;
  Dataset ds;
  ds.dim = spec.dim;
  Taxonomy& t = ds.taxonomy;
  for (std::size_t f = 0; f < spec.n_families; ++f)
    t.families.push_back(cat("fam", f));
  for (std::size_t l = 0; l < n_lang; ++l) {
    t.languages.push_back(cat("lang", l));
    t.lang_to_family.push_back(l / spec.langs_per_family);
  }
  for (std::size_t e = 0; e < spec.n_encodings; ++e)
    t.encodings.push_back(cat("enc", e));
  if (spec.speakers_per_language > 0)
    for (std::size_t l = 0; l < n_lang; ++l)
      for (std::size_t s = 0; s < spec.speakers_per_language; ++s)
        t.speakers.push_back(cat("lang", l, "_spk", s));
  validate(t);

  // Structure draws come first in a fixed order so the layout below only
  // depends on the seed, not on the requested counts.
  Rng rng(sub_seed(spec.seed, "synth-structure"));
  std::vector<Vec> family_centers(spec.n_families, Vec(spec.dim));
  for (auto& c : family_centers)
    for (double& v : c) v = rng.gaussian(0.0, spec.family_spread);
  std::vector<Vec> language_means(n_lang, Vec(spec.dim));
  for (std::size_t l = 0; l < n_lang; ++l) {
    const Vec& center = family_centers[t.lang_to_family[l]];
    for (std::size_t j = 0; j < spec.dim; ++j)
      language_means[l][j] = center[j] + rng.gaussian(0.0, spec.language_spread);
  }
  std::vector<Vec> encoding_shifts(spec.n_encodings, Vec(spec.dim));
  for (auto& u : encoding_shifts) {
    for (double& v : u) v = rng.gaussian();
    double norm = norm2(u);
    if (norm == 0.0) norm = 1.0;
    for (double& v : u) v = v / norm * spec.encoding_shift;
  }
  std::vector<Vec> speaker_offsets;
  if (spec.speakers_per_language > 0) {
    speaker_offsets.assign(n_lang * spec.speakers_per_language, Vec(spec.dim));
    for (auto& o : speaker_offsets)
      for (double& v : o) v = rng.gaussian(0.0, spec.speaker_spread);
  }

  Rng noise(sub_seed(spec.seed, "synth-noise"));
  for (std::size_t l = 0; l < n_lang; ++l) {
    for (std::size_t e = 0; e < spec.n_encodings; ++e) {
      std::size_t count = spec.counts_per_class[l * spec.n_encodings + e];
      for (std::size_t i = 0; i < count; ++i) {
        Sample s;
        s.language = l;
        s.encoding = e;
        s.features.resize(spec.dim);
        const Vec* spk_off = nullptr;
        if (spec.speakers_per_language > 0) {
          std::size_t local = i % spec.speakers_per_language;
          s.speaker = l * spec.speakers_per_language + local;
          spk_off = &speaker_offsets[*s.speaker];
        }
        for (std::size_t j = 0; j < spec.dim; ++j) {
          double v = language_means[l][j] + encoding_shifts[e][j];
          if (spk_off) v += (*spk_off)[j];
          s.features[j] = v + noise.gaussian(0.0, spec.noise_sd);
        }
        ds.samples.push_back(std::move(s));
      }
    }
  }
  return ds;
}

}  // namespace lidkit
