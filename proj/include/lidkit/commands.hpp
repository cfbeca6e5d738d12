#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "lidkit/backends.hpp"
#include "lidkit/checkpoint_io.hpp"
#include "lidkit/common.hpp"
#include "lidkit/config.hpp"
#include "lidkit/data.hpp"
#include "lidkit/dataset_io.hpp"
#include "lidkit/metrics.hpp"
#include "lidkit/optim.hpp"

namespace lidkit {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail_input("cannot open '", path, "' for writing");
  return out;
}

// Insert a split suffix before the extension: proj.tsv -> proj.train.tsv.
inline std::string with_suffix(const std::string& path,
                               const std::string& suffix) {
  std::size_t dot = path.find_last_of('.');
  std::size_t slash = path.find_last_of('/');
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash))
    return path + "." + suffix;
  return path.substr(0, dot) + "." + suffix + path.substr(dot);
}

inline std::pair<Dataset, Dataset> load_train_val(const Config& cfg) {
  if (cfg.train_path.empty())
    fail_usage("train_path is required for this command");
  Dataset full = load_dataset(cfg.train_path);
  validate(full);
  if (!cfg.val_path.empty()) {
    Dataset val = load_dataset(cfg.val_path);
    validate(val);
    return {std::move(full), std::move(val)};
  }
  auto [tr, va] = random_split(full, cfg.train_fraction,
                               sub_seed(cfg.seed, "split"));
  if (tr.samples.empty() || va.samples.empty())
    fail_input("train/validation split produced an empty part (fraction ",
               cfg.train_fraction, ", ", full.size(), " samples)");
  return {std::move(tr), std::move(va)};
}

inline WeightTable make_table(const Config& cfg, const Dataset& train_ds) {
  if (!cfg.bce) return uniform_table(train_ds.taxonomy, cfg.weight_min,
                                     cfg.weight_max);
  return build_weight_table(train_ds, cfg.weight_min, cfg.weight_max);
}

inline Matrix language_scores(const HausModel& model, const Dataset& ds) {
  return haus_forward(model, feature_matrix(ds)).language_post;
}

inline void check_same_labels(const Taxonomy& a, const Taxonomy& b,
                              const char* what) {
  if (a.languages != b.languages || a.families != b.families ||
      a.lang_to_family != b.lang_to_family || a.encodings != b.encodings)
    fail_input(what, ": taxonomy does not match the checkpoint's");
}

inline void write_history(const TrainHistory& h, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "epoch\ttrain_loss\tval_loss\tval_cost_x100\tgl\tscale\trollback\n";
  for (std::size_t i = 0; i < h.epochs(); ++i)
    out << (i + 1) << "\t" << format_double(h.train_loss[i]) << "\t"
        << format_double(h.val_loss[i]) << "\t"
        << format_double(h.val_cost[i] * 100.0) << "\t"
        << format_double(h.gl[i]) << "\t" << format_double(h.scale[i]) << "\t"
        << (h.rolled_back[i] ? 1 : 0) << "\n";
  out << "# best_epoch " << h.best_epoch << "\n";
}

}  // namespace detail

// gen: synthesize a corpus and write it to cfg.out.
inline void cmd_gen(const Config& cfg) {
  SynthSpec spec = build_synth_spec(cfg);
  Dataset ds = gen_synthetic(spec);
  write_dataset(ds, cfg.out);
  log_info("gen: wrote ", ds.size(), " samples (",
           ds.taxonomy.n_languages(), " languages, ",
           ds.taxonomy.n_families(), " families, ",
           ds.taxonomy.n_encodings(), " encodings) to ", cfg.out);
}

// train: data -> weight table -> model -> optimizer; writes the checkpoint
// and the per-epoch history.
inline void cmd_train(const Config& cfg) {
  auto [train_ds, val_ds] = detail::load_train_val(cfg);
  WeightTable table = detail::make_table(cfg, train_ds);
  HausModel model = build_model(cfg, train_ds.taxonomy, train_ds.dim);
  TrainConfig tc = build_train_config(cfg);
  TrainHistory history = train(model, train_ds, val_ds, table, tc);
  save_checkpoint(model, cfg.checkpoint_path);
  detail::write_history(history, cfg.history_out);
  log_info("train: best epoch ", history.best_epoch, " of ",
           history.epochs(), ", checkpoint ", cfg.checkpoint_path);
}

// eval: checkpoint + labeled dataset -> cost report files.
inline CostReport cmd_eval(const Config& cfg) {
  if (cfg.eval_path.empty()) fail_usage("eval_path is required for eval");
  HausModel model = load_checkpoint(cfg.checkpoint_path);
  Dataset ds = load_dataset(cfg.eval_path);
  validate(ds);
  detail::check_same_labels(ds.taxonomy, model.taxonomy, "eval");
  if (ds.dim != input_dim(model))
    fail_input("eval: dataset dim ", ds.dim, " != model input ",
               input_dim(model));
  Matrix scores = detail::language_scores(model, ds);
  CostReport rep = evaluate(scores, language_labels(ds), encoding_labels(ds),
                            ds.taxonomy, cfg.p_targets);
  std::ofstream out = detail::open_out(cfg.report_out);
  out << report_to_tsv(rep);
  if (log_level() >= 1) std::cout << report_to_text(rep, ds.taxonomy);
  return rep;
}

// sweep-eta: retrain with each eta on identical data/seeds and tabulate
// C_primary per value.
inline void cmd_sweep_eta(const Config& cfg) {
  auto [train_ds, val_ds] = detail::load_train_val(cfg);
  Dataset eval_ds;
  bool have_eval = !cfg.eval_path.empty();
  if (have_eval) {
    eval_ds = load_dataset(cfg.eval_path);
    validate(eval_ds);
    detail::check_same_labels(eval_ds.taxonomy, train_ds.taxonomy, "sweep");
  }
  WeightTable table = detail::make_table(cfg, train_ds);
  std::ofstream out = detail::open_out(cfg.sweep_out);
  out << "eta\tval_c_primary_x100";
  if (have_eval) out << "\teval_c_primary_x100";
  out << "\n";
  for (double eta : cfg.eta_list) {
    Config run = cfg;
    run.eta = eta;
    HausModel model = build_model(run, train_ds.taxonomy, train_ds.dim);
    TrainConfig tc = build_train_config(run);
    train(model, train_ds, val_ds, table, tc);
    double val_cost = c_primary(detail::language_scores(model, val_ds),
                                language_labels(val_ds), cfg.p_targets);
    out << detail::format_double(eta) << "\t"
        << detail::format_cost(val_cost);
    if (have_eval) {
      double eval_cost = c_primary(detail::language_scores(model, eval_ds),
                                   language_labels(eval_ds), cfg.p_targets);
      out << "\t" << detail::format_cost(eval_cost);
    }
    out << "\n";
    log_info("sweep-eta: eta ", eta, " done");
  }
}

// project: PCA -> LDA fitted on the training portion (optionally on the
// trunk's hidden representation from a checkpoint), exported per split.
inline void cmd_project(const Config& cfg) {
  if (cfg.train_path.empty()) fail_usage("train_path is required for project");
  Dataset fit_ds = load_dataset(cfg.train_path);
  validate(fit_ds);

  HausModel model;
  bool use_hidden = cfg.project_hidden;
  if (use_hidden) {
    model = load_checkpoint(cfg.checkpoint_path);
    detail::check_same_labels(fit_ds.taxonomy, model.taxonomy, "project");
  }
  auto representation = [&](const Dataset& ds) {
    if (!use_hidden) return ds;
    Dataset rep = ds;
    Matrix h = forward(model.trunk, feature_matrix(ds)).output();
    rep.dim = h.cols;
    for (std::size_t i = 0; i < rep.samples.size(); ++i)
      rep.samples[i].features.assign(h.row(i), h.row(i) + h.cols);
    return rep;
  };

  Dataset fit_rep = representation(fit_ds);
  std::size_t pca_dim = std::min(cfg.pca_dim, fit_rep.dim);
  std::vector<LinearTransform> chain;
  chain.push_back(fit_pca(feature_matrix(fit_rep), pca_dim));
  Matrix reduced = apply_rows(chain[0], feature_matrix(fit_rep));
  chain.push_back(fit_lda(reduced, language_labels(fit_rep),
                          fit_rep.taxonomy.n_languages(), cfg.lda_dim));
  export_projection(chain, fit_rep,
                    detail::with_suffix(cfg.projection_out, "train"));
  for (const auto& [path, name] :
       {std::pair{cfg.val_path, "val"}, std::pair{cfg.eval_path, "eval"}}) {
    if (path.empty()) continue;
    Dataset ds = load_dataset(path);
    validate(ds);
    detail::check_same_labels(ds.taxonomy, fit_ds.taxonomy, "project");
    export_projection(chain, representation(ds),
                      detail::with_suffix(cfg.projection_out, name));
  }
  log_info("project: wrote projections to ",
           detail::with_suffix(cfg.projection_out, "train"), " (+ splits)");
}

// weights: dump the three prior-derived tables and the combined ranges.
inline void cmd_weights(const Config& cfg) {
  if (cfg.train_path.empty()) fail_usage("train_path is required for weights");
  Dataset ds = load_dataset(cfg.train_path);
  validate(ds);
  WeightTable table = detail::make_table(cfg, ds);
  const Taxonomy& t = ds.taxonomy;
  std::ostream& out = std::cout;
  out << "bounds [" << table.x_min << ", " << table.x_max << "]\n";
  out << "w_encoding\n";
  for (std::size_t e = 0; e < t.n_encodings(); ++e)
    out << "  " << t.encodings[e] << "\t" << detail::format_double(table.w_encoding[e])
        << "\n";
  out << "w_cluster\n";
  for (std::size_t f = 0; f < t.n_families(); ++f)
    out << "  " << t.families[f] << "\t" << detail::format_double(table.w_cluster[f])
        << "\n";
  out << "w_language\n";
  for (std::size_t l = 0; l < t.n_languages(); ++l)
    out << "  " << t.languages[l] << "\t"
        << detail::format_double(table.w_language[l]) << "\n";
  auto [w_fam, w_lang] = example_weights(table, encoding_labels(ds),
                                         family_labels(ds),
                                         language_labels(ds));
  auto range = [](const Vec& v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    return std::pair{lo, hi};
  };
  auto [flo, fhi] = range(w_fam);
  auto [llo, lhi] = range(w_lang);
  out << "combined W_F range [" << detail::format_double(flo) << ", "
      << detail::format_double(fhi) << "]\n";
  out << "combined W_L range [" << detail::format_double(llo) << ", "
      << detail::format_double(lhi) << "]\n";
}

}  // namespace lidkit
