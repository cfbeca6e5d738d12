#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "lidkit/commands.hpp"
#include "lidkit/config.hpp"
#include "lidkit/data.hpp"
#include "lidkit/metrics.hpp"
#include "lidkit/optim.hpp"

namespace lidkit {

// One architecture/objective variant of the comparison table.
struct Variant {
  std::string name;
  MultitaskMode mode = MultitaskMode::Haus;
  bool haus = true;
  bool bce = true;
};

// The comparison rows: single task, hard sharing, hard sharing with the
// adaptive objective ("no haus"), coupled heads without it ("no bce"),
// and the full system. Soft sharing is out of scope.
inline std::vector<Variant> standard_variants() {
  return {
      {"single-task", MultitaskMode::Single, false, false},
      {"multitask-hard", MultitaskMode::Hard, false, false},
      {"no-haus", MultitaskMode::Hard, false, true},
      {"no-bce", MultitaskMode::Haus, true, false},
      {"haus-bce", MultitaskMode::Haus, true, true},
  };
}

struct SuiteCell {
  double val_cost = 0.0;   // c_primary, [0, 1]
  double eval_cost = 0.0;
  std::vector<double> val_per_encoding;
  std::vector<double> eval_per_encoding;
};

struct SuiteRun {
  std::string variant;
  std::size_t seed_index = 0;
  SuiteCell cell;
};

struct SuiteResult {
  std::vector<std::string> encodings;
  std::vector<SuiteRun> runs;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= double(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / double(xs.size() - 1));
  }
  return r;
}

inline std::string format_mean_sd(const MeanSd& m) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f +- %.2f", m.mean * 100.0,
                m.sd * 100.0);
  return buf;
}

namespace detail {

struct SplitTriple {
  Dataset train;
  Dataset val;
  Dataset eval;
};

// Per-seed corpus: one synthetic generation, eval carved off first, then
// train/validation from the remainder. All variants of one seed share it.
inline SplitTriple make_suite_data(const Config& cfg, std::size_t seed_index) {
  Config data_cfg = cfg;
  data_cfg.seed = sub_seed(cfg.seed, "suite-data", seed_index);
  SynthSpec spec = build_synth_spec(data_cfg);
  Dataset corpus = gen_synthetic(spec);
  auto [eval_ds, dev] = random_split(corpus, cfg.eval_fraction,
                                     sub_seed(data_cfg.seed, "eval-split"));
  auto [train_ds, val_ds] = random_split(dev, cfg.train_fraction,
                                         sub_seed(data_cfg.seed, "split"));
  return {std::move(train_ds), std::move(val_ds), std::move(eval_ds)};
}

inline SuiteCell run_variant(const Config& base, const Variant& variant,
                             const SplitTriple& data, std::uint64_t init_seed,
                             std::uint64_t shuffle_seed) {
  Config cfg = base;
  cfg.multitask = variant.mode;
  cfg.haus = variant.haus;
  cfg.bce = variant.bce;
  WeightTable table = make_table(cfg, data.train);
  HausModel model = make_haus_model(data.train.taxonomy,
                                    build_layout(cfg, data.train.dim),
                                    cfg.effective_mode(), cfg.eta, init_seed);
  TrainConfig tc = build_train_config(cfg);
  tc.seed = shuffle_seed;
  train(model, data.train, data.val, table, tc);
  SuiteCell cell;
  auto fill = [&](const Dataset& ds, double& pooled,
                  std::vector<double>& per_enc) {
    Matrix scores = language_scores(model, ds);
    CostReport rep = evaluate(scores, language_labels(ds),
                              encoding_labels(ds), ds.taxonomy,
                              cfg.p_targets);
    pooled = rep.c_primary;
    per_enc.assign(ds.taxonomy.n_encodings(), 0.0);
    for (const EncodingCell& c : rep.per_encoding) {
      for (std::size_t e = 0; e < ds.taxonomy.n_encodings(); ++e)
        if (c.encoding == ds.taxonomy.encodings[e]) per_enc[e] = c.cavg;
    }
  };
  fill(data.val, cell.val_cost, cell.val_per_encoding);
  fill(data.eval, cell.eval_cost, cell.eval_per_encoding);
  return cell;
}

}  // namespace detail

// Paired comparison over >= 5 seeds: all variants of a seed consume the
// identical dataset files and init/shuffle seeds, so differences are
// attributable to the mechanism under test. Rows are appended to
// <results_dir>/suite_runs.tsv as they finish, so an aborted suite keeps
// its partial results; the summary table is rewritten at the end.
inline SuiteResult run_suite(const Config& cfg,
                             const std::vector<Variant>& variants =
                                 standard_variants()) {
  validate(cfg);
  std::filesystem::create_directories(cfg.results_dir);
  std::string runs_path = cfg.results_dir + "/suite_runs.tsv";
  std::ofstream runs_out(runs_path);
  if (!runs_out) fail_input("cannot open '", runs_path, "' for writing");
  SuiteResult result;
  bool wrote_header = false;
  for (std::size_t s = 0; s < cfg.suite_seeds; ++s) {
    detail::SplitTriple data = detail::make_suite_data(cfg, s);
    if (!wrote_header) {
      result.encodings = data.train.taxonomy.encodings;
      runs_out << "variant\tseed";
      for (const std::string& e : result.encodings)
        runs_out << "\tval_" << e;
      runs_out << "\tval_avg";
      for (const std::string& e : result.encodings)
        runs_out << "\teval_" << e;
      runs_out << "\teval_avg\n";
      wrote_header = true;
    }
    std::uint64_t init_seed = sub_seed(cfg.seed, "suite-init", s);
    std::uint64_t shuffle_seed = sub_seed(cfg.seed, "suite-shuffle", s);
    for (const Variant& variant : variants) {
      log_info("suite: seed ", s, " variant ", variant.name);
      SuiteCell cell = detail::run_variant(cfg, variant, data, init_seed,
                                           shuffle_seed);
      result.runs.push_back({variant.name, s, cell});
      runs_out << variant.name << "\t" << s;
      for (double v : cell.val_per_encoding)
        runs_out << "\t" << detail::format_cost(v);
      runs_out << "\t" << detail::format_cost(cell.val_cost);
      for (double v : cell.eval_per_encoding)
        runs_out << "\t" << detail::format_cost(v);
      runs_out << "\t" << detail::format_cost(cell.eval_cost) << "\n";
      runs_out.flush();
    }
  }
  // summary: mean +- sd per variant and column
  std::string summary_path = cfg.results_dir + "/suite_results.tsv";
  std::ofstream sum_out(summary_path);
  if (!sum_out) fail_input("cannot open '", summary_path, "' for writing");
  sum_out << "variant";
  for (const std::string& e : result.encodings) sum_out << "\tval_" << e;
  sum_out << "\tval_avg";
  for (const std::string& e : result.encodings) sum_out << "\teval_" << e;
  sum_out << "\teval_avg\n";
  for (const Variant& variant : variants) {
    std::vector<std::vector<double>> cols(2 * result.encodings.size() + 2);
    for (const SuiteRun& run : result.runs) {
      if (run.variant != variant.name) continue;
      std::size_t c = 0;
      for (double v : run.cell.val_per_encoding) cols[c++].push_back(v);
      cols[c++].push_back(run.cell.val_cost);
      for (double v : run.cell.eval_per_encoding) cols[c++].push_back(v);
      cols[c++].push_back(run.cell.eval_cost);
    }
    sum_out << variant.name;
    for (const auto& col : cols)
      sum_out << "\t" << format_mean_sd(mean_sd(col));
    sum_out << "\n";
  }
  log_info("suite: results in ", summary_path);
  return result;
}

struct BackendRow {
  std::string name;
  MeanSd val_cost;
  MeanSd eval_cost;
};

// Backend comparison rows (cosine scoring, MCLR, the staircase model) on
// paired per-seed datasets. Cosine similarities are softmaxed per trial so
// the detection metrics see score vectors on a common footing.
inline std::vector<BackendRow> run_backends(const Config& cfg) {
  validate(cfg);
  std::filesystem::create_directories(cfg.results_dir);
  std::vector<std::string> names = {"cosine", "mclr", "haus"};
  std::vector<std::vector<double>> val_cols(3), eval_cols(3);
  for (std::size_t s = 0; s < cfg.suite_seeds; ++s) {
    detail::SplitTriple data = detail::make_suite_data(cfg, s);
    std::uint64_t init_seed = sub_seed(cfg.seed, "suite-init", s);
    std::uint64_t shuffle_seed = sub_seed(cfg.seed, "suite-shuffle", s);
    auto cost_of = [&](const Dataset& ds, const Matrix& scores) {
      return c_primary(scores, language_labels(ds), cfg.p_targets);
    };
    // cosine scoring against per-language centroids
    CentroidModel centroids = fit_centroids(data.train);
    auto cosine_scores = [&](const Dataset& ds) {
      Matrix raw(ds.size(), ds.taxonomy.n_languages());
      for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t l = 0; l < ds.taxonomy.n_languages(); ++l) {
          Vec c(centroids.centroids.row(l),
                centroids.centroids.row(l) + ds.dim);
          raw(i, l) = cosine_score(ds.samples[i].features, c);
        }
      return softmax_rows(raw);
    };
    val_cols[0].push_back(cost_of(data.val, cosine_scores(data.val)));
    eval_cols[0].push_back(cost_of(data.eval, cosine_scores(data.eval)));
    // MCLR: single softmax layer, plain cross-entropy
    {
      HausModel mclr = mclr_build(data.train.taxonomy, data.train.dim,
                                  init_seed);
      Config plain = cfg;
      plain.bce = false;
      TrainConfig tc = build_train_config(plain);
      tc.seed = shuffle_seed;
      tc.eta = 0.0;
      WeightTable table = uniform_table(data.train.taxonomy);
      train(mclr, data.train, data.val, table, tc);
      val_cols[1].push_back(
          cost_of(data.val, detail::language_scores(mclr, data.val)));
      eval_cols[1].push_back(
          cost_of(data.eval, detail::language_scores(mclr, data.eval)));
    }
    // full staircase model with the configured objective
    {
      SuiteCell cell = detail::run_variant(
          cfg, {"haus", MultitaskMode::Haus, true, true}, data, init_seed,
          shuffle_seed);
      val_cols[2].push_back(cell.val_cost);
      eval_cols[2].push_back(cell.eval_cost);
    }
    log_info("backends: seed ", s, " done");
  }
  std::vector<BackendRow> rows;
  std::string path = cfg.results_dir + "/backends_results.tsv";
  std::ofstream out(path);
  if (!out) fail_input("cannot open '", path, "' for writing");
  out << "backend\tval_c_primary\teval_c_primary\n";
  for (std::size_t b = 0; b < names.size(); ++b) {
    BackendRow row{names[b], mean_sd(val_cols[b]), mean_sd(eval_cols[b])};
    out << row.name << "\t" << format_mean_sd(row.val_cost) << "\t"
        << format_mean_sd(row.eval_cost) << "\n";
    rows.push_back(std::move(row));
  }
  log_info("backends: results in ", path);
  return rows;
}

struct LosoRepetition {
  std::size_t repetition = 0;
  double c_primary = 0.0;
  double c_avg_hard = 0.0;
  std::set<std::size_t> held_out_speakers;
};

struct LosoResult {
  std::vector<LosoRepetition> repetitions;
  MeanSd c_primary_agg;
  MeanSd c_avg_hard_agg;
};

// Leave-one-speaker-out protocol: per repetition, fresh val/test speakers
// per language (disjoint across repetitions while speakers last), train on
// the rest, score the held-out test speakers.
inline LosoResult run_loso(const Config& cfg) {
  validate(cfg);
  Dataset corpus;
  if (!cfg.train_path.empty()) {
    corpus = load_dataset(cfg.train_path);
    validate(corpus);
  } else {
    Config data_cfg = cfg;
    data_cfg.seed = sub_seed(cfg.seed, "loso-data");
    corpus = gen_synthetic(build_synth_spec(data_cfg));
  }
  std::filesystem::create_directories(cfg.results_dir);
  std::string path = cfg.results_dir + "/loso_results.tsv";
  std::ofstream out(path);
  if (!out) fail_input("cannot open '", path, "' for writing");
  out << "repetition\tc_primary_x100\tc_avg_x100\theld_out_speakers\n";
  LosoResult result;
  std::set<std::size_t> used;
  std::vector<double> softs, hards;
  for (std::size_t r = 0; r < cfg.loso_repetitions; ++r) {
    auto [train_ds, val_ds, test_ds] =
        loso_split(corpus, sub_seed(cfg.seed, "loso-split", r), used);
    LosoRepetition rep;
    rep.repetition = r;
    for (const Sample& s : val_ds.samples) rep.held_out_speakers.insert(*s.speaker);
    for (const Sample& s : test_ds.samples) rep.held_out_speakers.insert(*s.speaker);
    used.insert(rep.held_out_speakers.begin(), rep.held_out_speakers.end());

    WeightTable table = detail::make_table(cfg, train_ds);
    HausModel model = make_haus_model(train_ds.taxonomy,
                                      build_layout(cfg, train_ds.dim),
                                      cfg.effective_mode(), cfg.eta,
                                      sub_seed(cfg.seed, "loso-init", r));
    TrainConfig tc = build_train_config(cfg);
    tc.seed = sub_seed(cfg.seed, "loso-shuffle", r);
    train(model, train_ds, val_ds, table, tc);
    Matrix scores = detail::language_scores(model, test_ds);
    std::vector<std::size_t> labels = language_labels(test_ds);
    rep.c_primary = c_primary(scores, labels, cfg.p_targets);
    rep.c_avg_hard = c_avg_simple(argmax_rows(scores), labels,
                                  test_ds.taxonomy.n_languages());
    softs.push_back(rep.c_primary);
    hards.push_back(rep.c_avg_hard);
    out << r << "\t" << detail::format_cost(rep.c_primary) << "\t"
        << detail::format_cost(rep.c_avg_hard) << "\t";
    bool first = true;
    for (std::size_t s : rep.held_out_speakers) {
      if (!first) out << ",";
      out << corpus.taxonomy.speakers[s];
      first = false;
    }
    out << "\n";
    out.flush();
    result.repetitions.push_back(std::move(rep));
    log_info("loso: repetition ", r, " done");
  }
  result.c_primary_agg = mean_sd(softs);
  result.c_avg_hard_agg = mean_sd(hards);
  out << "# aggregate c_primary " << format_mean_sd(result.c_primary_agg)
      << "\n";
  out << "# aggregate c_avg " << format_mean_sd(result.c_avg_hard_agg) << "\n";
  return result;
}

}  // namespace lidkit
