#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/data.hpp"
#include "lidkit/dataset_io.hpp"
#include "lidkit/haus.hpp"
#include "lidkit/objective.hpp"
#include "lidkit/optim.hpp"

namespace lidkit {

// Raised for bad usage (unknown key, malformed value, missing file path in
// the config) as opposed to runtime failures; the CLI maps it to a
// distinct exit code.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] void fail_usage(Args&&... args) {
  throw UsageError(cat(std::forward<Args>(args)...));
}

// Every knob of the pipeline, flat. Defaults describe the stock synthetic
// corpus (4 families x 3 languages, 2 encodings at 85/15, 200 samples per
// language) and the staircase model profile.
struct Config {
  std::uint64_t seed = 42;

  // synthetic corpus
  std::size_t synth_families = 4;
  std::size_t synth_langs_per_family = 3;
  std::size_t synth_encodings = 2;
  std::size_t synth_dim = 20;
  double synth_family_spread = 2.0;
  double synth_language_spread = 0.9;
  double synth_encoding_shift = 8.0;
  double synth_noise_sd = 1.2;
  std::size_t synth_samples_per_language = 200;
  Vec synth_encoding_balance = {0.85, 0.15};
  std::vector<std::size_t> synth_counts;  // optional explicit per-class list
  std::size_t synth_speakers_per_language = 0;
  double synth_speaker_spread = 0.0;

  // paths
  std::string out = "data.tsv";
  std::string train_path;
  std::string val_path;
  std::string eval_path;
  std::string checkpoint_path = "model.ckpt";
  std::string history_out = "history.tsv";
  std::string report_out = "report.tsv";
  std::string projection_out = "projection.tsv";
  std::string sweep_out = "sweep.tsv";
  std::string results_dir = "results";

  // splits
  double train_fraction = 0.7;  // train share when val_path is empty
  double eval_fraction = 0.25;  // eval share carved off by the harness

  // model
  std::vector<std::size_t> trunk_dims = {32};
  std::vector<std::size_t> family_hidden_dims;
  std::vector<std::size_t> language_hidden_dims = {16};
  bool staircase = true;

  // objective
  double eta = 0.6;
  double weight_min = 0.1;
  double weight_max = 8.0;
  // mini-batch statistics suit small corpora; switch to global when the
  // training set is large enough to pin the priors
  PriorMode prior_mode = PriorMode::MiniBatch;
  MultitaskMode multitask = MultitaskMode::Haus;
  bool haus = true;  // logit coupling; off downgrades haus -> hard
  bool bce = true;   // prior-derived weights; off trains plain CE

  // training
  std::size_t batch_size = 48;
  std::size_t max_epochs = 60;
  double decay = 0.96;
  double gl_threshold = 5.0;
  double rho = 0.95;
  double epsilon = 1e-6;

  // metrics
  Vec p_targets = {0.5, 0.1};

  // sweep / projection / experiments
  Vec eta_list = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::size_t pca_dim = 10;
  std::size_t lda_dim = 2;
  bool project_hidden = false;
  std::size_t suite_seeds = 5;
  std::size_t loso_repetitions = 3;

  MultitaskMode effective_mode() const {
    if (multitask == MultitaskMode::Haus && !haus) return MultitaskMode::Hard;
    return multitask;
  }

  // bce=off means uniform weights; MiniBatch statistics would reweight
  // regardless of the table, so the ablation forces Global mode.
  PriorMode effective_prior_mode() const {
    return bce ? prior_mode : PriorMode::Global;
  }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  fail_usage("config: key '", key, "' expects on/off, got '", v, "'");
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    fail_usage("config: key '", key, "' expects a real number, got '", v,
               "'");
  }
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long r = std::stoll(v, &pos);
    if (pos != v.size() || r < 0) throw std::invalid_argument("bad");
    return static_cast<std::size_t>(r);
  } catch (const std::exception&) {
    fail_usage("config: key '", key, "' expects a nonnegative integer, got '",
               v, "'");
  }
}

inline Vec parse_real_list(const std::string& key, const std::string& v) {
  Vec out;
  if (trim(v).empty()) return out;
  for (const std::string& part : split(v, ','))
    out.push_back(parse_real(key, trim(part)));
  return out;
}

inline std::vector<std::size_t> parse_count_list(const std::string& key,
                                                 const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  for (const std::string& part : split(v, ','))
    out.push_back(parse_count(key, trim(part)));
  return out;
}

}  // namespace detail

// Applies one key=value pair; unknown keys are usage errors.
inline void config_set(Config& c, const std::string& key,
                       const std::string& value) {
  using detail::parse_bool;
  using detail::parse_count;
  using detail::parse_count_list;
  using detail::parse_real;
  using detail::parse_real_list;
  if (key == "seed") c.seed = parse_count(key, value);
  else if (key == "synth_families") c.synth_families = parse_count(key, value);
  else if (key == "synth_langs_per_family")
    c.synth_langs_per_family = parse_count(key, value);
  else if (key == "synth_encodings") c.synth_encodings = parse_count(key, value);
  else if (key == "synth_dim") c.synth_dim = parse_count(key, value);
  else if (key == "synth_family_spread")
    c.synth_family_spread = parse_real(key, value);
  else if (key == "synth_language_spread")
    c.synth_language_spread = parse_real(key, value);
  else if (key == "synth_encoding_shift")
    c.synth_encoding_shift = parse_real(key, value);
  else if (key == "synth_noise_sd") c.synth_noise_sd = parse_real(key, value);
  else if (key == "synth_samples_per_language")
    c.synth_samples_per_language = parse_count(key, value);
  else if (key == "synth_encoding_balance")
    c.synth_encoding_balance = parse_real_list(key, value);
  else if (key == "synth_counts") c.synth_counts = parse_count_list(key, value);
  else if (key == "synth_speakers_per_language")
    c.synth_speakers_per_language = parse_count(key, value);
  else if (key == "synth_speaker_spread")
    c.synth_speaker_spread = parse_real(key, value);
  else if (key == "out") c.out = value;
  else if (key == "train_path") c.train_path = value;
  else if (key == "val_path") c.val_path = value;
  else if (key == "eval_path") c.eval_path = value;
  else if (key == "checkpoint") c.checkpoint_path = value;
  else if (key == "history_out") c.history_out = value;
  else if (key == "report_out") c.report_out = value;
  else if (key == "projection_out") c.projection_out = value;
  else if (key == "sweep_out") c.sweep_out = value;
  else if (key == "results_dir") c.results_dir = value;
  else if (key == "train_fraction") c.train_fraction = parse_real(key, value);
  else if (key == "eval_fraction") c.eval_fraction = parse_real(key, value);
  else if (key == "trunk_dims") c.trunk_dims = parse_count_list(key, value);
  else if (key == "family_hidden_dims")
    c.family_hidden_dims = parse_count_list(key, value);
  else if (key == "language_hidden_dims")
    c.language_hidden_dims = parse_count_list(key, value);
  else if (key == "staircase") c.staircase = parse_bool(key, value);
  else if (key == "eta") c.eta = parse_real(key, value);
  else if (key == "weight_min") c.weight_min = parse_real(key, value);
  else if (key == "weight_max") c.weight_max = parse_real(key, value);
  else if (key == "prior_mode") {
    if (value == "global") c.prior_mode = PriorMode::Global;
    else if (value == "minibatch") c.prior_mode = PriorMode::MiniBatch;
    else fail_usage("config: prior_mode must be global or minibatch, got '",
                    value, "'");
  } else if (key == "multitask") {
    if (value == "single") c.multitask = MultitaskMode::Single;
    else if (value == "hard") c.multitask = MultitaskMode::Hard;
    else if (value == "haus") c.multitask = MultitaskMode::Haus;
    else fail_usage("config: multitask must be single, hard or haus, got '",
                    value, "'");
  } else if (key == "haus") c.haus = parse_bool(key, value);
  else if (key == "bce") c.bce = parse_bool(key, value);
  else if (key == "batch_size") c.batch_size = parse_count(key, value);
  else if (key == "max_epochs") c.max_epochs = parse_count(key, value);
  else if (key == "decay") c.decay = parse_real(key, value);
  else if (key == "gl_threshold") c.gl_threshold = parse_real(key, value);
  else if (key == "rho") c.rho = parse_real(key, value);
  else if (key == "epsilon") c.epsilon = parse_real(key, value);
  else if (key == "p_targets") c.p_targets = parse_real_list(key, value);
  else if (key == "eta_list") c.eta_list = parse_real_list(key, value);
  else if (key == "pca_dim") c.pca_dim = parse_count(key, value);
  else if (key == "lda_dim") c.lda_dim = parse_count(key, value);
  else if (key == "project_hidden") c.project_hidden = parse_bool(key, value);
  else if (key == "suite_seeds") c.suite_seeds = parse_count(key, value);
  else if (key == "loso_repetitions")
    c.loso_repetitions = parse_count(key, value);
  else fail_usage("config: unknown key '", key, "'");
}

// Flat key = value lines; '#' comments and blank lines ignored.
inline void load_config_file(Config& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_usage("cannot open config file '", path, "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    std::string key, value;
    if (eq != std::string::npos) {
      key = detail::trim(s.substr(0, eq));
      value = detail::trim(s.substr(eq + 1));
    } else {
      std::size_t sp = s.find_first_of(" \t");
      if (sp == std::string::npos)
        fail_usage(path, " line ", line_no, ": expected 'key = value'");
      key = detail::trim(s.substr(0, sp));
      value = detail::trim(s.substr(sp + 1));
    }
    if (key.empty()) fail_usage(path, " line ", line_no, ": empty key");
    try {
      config_set(c, key, value);
    } catch (const UsageError& e) {
      fail_usage(path, " line ", line_no, ": ", e.what());
    }
  }
}

inline void validate(const Config& c) {
  if (c.synth_encoding_balance.empty() && c.synth_counts.empty())
    fail_usage("config: synth_encoding_balance or synth_counts required");
  for (double b : c.synth_encoding_balance)
    if (b < 0.0) fail_usage("config: negative encoding balance entry");
  if (c.train_fraction < 0.0 || c.train_fraction > 1.0)
    fail_usage("config: train_fraction outside [0, 1]");
  if (c.eval_fraction < 0.0 || c.eval_fraction >= 1.0)
    fail_usage("config: eval_fraction outside [0, 1)");
  if (c.eta < 0.0 || c.eta > 1.0)
    fail_usage("config: eta outside [0, 1]");
  if (!(c.weight_min > 0.0) || c.weight_max < c.weight_min)
    fail_usage("config: weight bounds need 0 < weight_min <= weight_max");
  if (c.batch_size < 1) fail_usage("config: batch_size must be >= 1");
  if (!(c.decay > 0.0 && c.decay <= 1.0))
    fail_usage("config: decay outside (0, 1]");
  if (!(c.gl_threshold > 0.0)) fail_usage("config: gl_threshold must be > 0");
  if (!(c.rho >= 0.0 && c.rho < 1.0)) fail_usage("config: rho outside [0, 1)");
  if (!(c.epsilon > 0.0)) fail_usage("config: epsilon must be > 0");
  if (c.language_hidden_dims.empty() && c.trunk_dims.empty() &&
      c.effective_mode() != MultitaskMode::Single)
    fail_usage("config: multi-task model needs a trunk or hidden layers");
  for (double p : c.p_targets)
    if (!(p > 0.0 && p <= 1.0))
      fail_usage("config: p_targets entries must lie in (0, 1]");
  if (c.p_targets.empty()) fail_usage("config: p_targets must be nonempty");
  for (double e : c.eta_list)
    if (e < 0.0 || e > 1.0) fail_usage("config: eta_list entry outside [0,1]");
  if (c.lda_dim == 0 || c.pca_dim == 0)
    fail_usage("config: pca_dim and lda_dim must be positive");
  if (c.suite_seeds < 1) fail_usage("config: suite_seeds must be >= 1");
  if (c.loso_repetitions < 1)
    fail_usage("config: loso_repetitions must be >= 1");
}

// --- derived pieces ---

inline SynthSpec build_synth_spec(const Config& c) {
  SynthSpec spec;
  spec.n_families = c.synth_families;
  spec.langs_per_family = c.synth_langs_per_family;
  spec.n_encodings = c.synth_encodings;
  spec.dim = c.synth_dim;
  spec.family_spread = c.synth_family_spread;
  spec.language_spread = c.synth_language_spread;
  spec.encoding_shift = c.synth_encoding_shift;
  spec.noise_sd = c.synth_noise_sd;
  spec.seed = sub_seed(c.seed, "data");
  spec.speakers_per_language = c.synth_speakers_per_language;
  spec.speaker_spread = c.synth_speaker_spread;
  std::size_t n_lang = c.synth_families * c.synth_langs_per_family;
  if (!c.synth_counts.empty()) {
    spec.counts_per_class = c.synth_counts;
  } else {
    if (c.synth_encoding_balance.size() != c.synth_encodings)
      fail_usage("config: synth_encoding_balance has ",
                 c.synth_encoding_balance.size(), " entries for ",
                 c.synth_encodings, " encodings");
    double total = 0.0;
    for (double b : c.synth_encoding_balance) total += b;
    if (!(total > 0.0))
      fail_usage("config: synth_encoding_balance sums to zero");
    spec.counts_per_class.reserve(n_lang * c.synth_encodings);
    for (std::size_t l = 0; l < n_lang; ++l)
      for (std::size_t e = 0; e < c.synth_encodings; ++e)
        spec.counts_per_class.push_back(static_cast<std::size_t>(std::llround(
            double(c.synth_samples_per_language) *
            c.synth_encoding_balance[e] / total)));
  }
  return spec;
}

inline TrainConfig build_train_config(const Config& c) {
  TrainConfig tc;
  tc.batch_size = c.batch_size;
  tc.max_epochs = c.max_epochs;
  tc.eta = c.eta;
  tc.prior_mode = c.effective_prior_mode();
  tc.decay = c.decay;
  tc.gl_threshold = c.gl_threshold;
  tc.seed = c.seed;
  tc.rho = c.rho;
  tc.epsilon = c.epsilon;
  return tc;
}

inline HausLayout build_layout(const Config& c, std::size_t input_dim) {
  HausLayout layout;
  layout.input_dim = input_dim;
  layout.trunk_hidden = c.trunk_dims;
  layout.family_hidden = c.family_hidden_dims;
  layout.language_hidden = c.language_hidden_dims;
  layout.staircase = c.staircase;
  return layout;
}

inline HausModel build_model(const Config& c, const Taxonomy& taxonomy,
                             std::size_t input_dim) {
  return make_haus_model(taxonomy, build_layout(c, input_dim),
                         c.effective_mode(), c.eta, sub_seed(c.seed, "init"));
}

}  // namespace lidkit
