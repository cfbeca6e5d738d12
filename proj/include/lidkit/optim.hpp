#pragma once

#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/data.hpp"
#include "lidkit/haus.hpp"
#include "lidkit/metrics.hpp"
#include "lidkit/objective.hpp"
#include "lidkit/rng.hpp"

namespace lidkit {

// ADADELTA accumulators plus a scalar step multiplier. Canonical ADADELTA
// has no learning rate; the multiplier is what the regression-triggered
// 0.96 decay acts on.
struct AdadeltaState {
  Vec acc_grad_sq;
  Vec acc_update_sq;
  double rho = 0.95;
  double epsilon = 1e-6;
  double scale = 1.0;

  explicit AdadeltaState(std::size_t n_params = 0, double rho_ = 0.95,
                         double epsilon_ = 1e-6)
      : acc_grad_sq(n_params, 0.0),
        acc_update_sq(n_params, 0.0),
        rho(rho_),
        epsilon(epsilon_) {}
};

// acc_g <- rho*acc_g + (1-rho)*g^2
// delta  = -sqrt(acc_u + eps)/sqrt(acc_g + eps) * g
// acc_u <- rho*acc_u + (1-rho)*delta^2
// param += scale * delta
inline void adadelta_step(Vec& params, const Vec& grads,
                          AdadeltaState& state) {
  if (params.size() != grads.size() ||
      params.size() != state.acc_grad_sq.size())
    fail_input("adadelta_step: size mismatch (params ", params.size(),
               ", grads ", grads.size(), ", state ",
               state.acc_grad_sq.size(), ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (std::isnan(g))
      fail_numeric("adadelta_step: NaN gradient at parameter ", i);
    double& ag = state.acc_grad_sq[i];
    double& au = state.acc_update_sq[i];
    ag = state.rho * ag + (1.0 - state.rho) * g * g;
    double delta = -std::sqrt(au + state.epsilon) /
                   std::sqrt(ag + state.epsilon) * g;
    au = state.rho * au + (1.0 - state.rho) * delta * delta;
    params[i] += state.scale * delta;
  }
}

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 60;
  double eta = 0.6;
  PriorMode prior_mode = PriorMode::Global;
  double decay = 0.96;         // step-scale decay applied on each regression
  double gl_threshold = 5.0;   // stop when GL exceeds this
  std::uint64_t seed = 0;
  double rho = 0.95;
  double epsilon = 1e-6;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) fail_input("train config: batch_size must be >= 1");
  if (!(cfg.decay > 0.0 && cfg.decay <= 1.0))
    fail_input("train config: decay ", cfg.decay, " outside (0, 1]");
  if (!(cfg.gl_threshold > 0.0))
    fail_input("train config: gl_threshold must be > 0");
  if (cfg.eta < 0.0 || cfg.eta > 1.0)
    fail_input("train config: eta ", cfg.eta, " outside [0, 1]");
}

struct TrainHistory {
  Vec train_loss;
  Vec val_loss;
  Vec val_cost;                      // c_primary on the validation set
  Vec gl;
  Vec scale;
  std::vector<bool> rolled_back;
  std::vector<std::size_t> rollback_epochs;  // 1-based
  std::size_t best_epoch = 0;                // 1-based, 0 = initial model

  std::size_t epochs() const { return train_loss.size(); }
};

// Generalization-loss early stopping: GL = 100*(E_va/E_opt - 1).
// New best on strict improvement; strict worsening is a regression that
// triggers rollback-and-decay in the training loop.
class GlStopper {
 public:
  explicit GlStopper(double threshold) : threshold_(threshold) {}

  struct Decision {
    bool new_best = false;
    bool regression = false;
    double gl = 0.0;
    bool stop = false;
  };

  Decision observe(std::size_t epoch, double val_loss) {
    Decision d;
    if (std::isnan(val_loss))
      fail_numeric("early stopping: NaN validation loss at epoch ", epoch);
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch;
      d.new_best = true;
      d.gl = 0.0;
    } else {
      d.gl = 100.0 * (val_loss / best_ - 1.0);
      if (val_loss > best_) {
        d.regression = true;
        ++regressions_;
      }
    }
    d.stop = d.gl > threshold_;
    return d;
  }

  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t regressions() const { return regressions_; }

 private:
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t regressions_ = 0;
};

// Opaque parameter snapshot for checkpoint/rollback.
struct ModelSnapshot {
  Vec params;
  std::size_t count = 0;
};

inline ModelSnapshot checkpoint(const HausModel& m) {
  ModelSnapshot snap;
  snap.params = flatten_params(m);
  snap.count = snap.params.size();
  return snap;
}

inline void rollback(HausModel& m, const ModelSnapshot& snap) {
  if (snap.count != param_count(m) || snap.params.size() != snap.count)
    fail_input("rollback: snapshot has ", snap.count,
               " parameters, model needs ", param_count(m));
  unflatten_params(m, snap.params);
}

namespace detail {

struct BatchView {
  Matrix x;
  std::vector<std::size_t> y_lang;
  std::vector<std::size_t> y_fam;
  std::vector<std::size_t> y_enc;
};

inline BatchView gather_batch(const Dataset& ds,
                              const std::vector<std::size_t>& order,
                              std::size_t begin, std::size_t end) {
  BatchView b;
  b.x = Matrix(end - begin, ds.dim);
  b.y_lang.resize(end - begin);
  b.y_fam.resize(end - begin);
  b.y_enc.resize(end - begin);
  for (std::size_t r = 0; r + begin < end; ++r) {
    const Sample& s = ds.samples[order[begin + r]];
    for (std::size_t j = 0; j < ds.dim; ++j) b.x(r, j) = s.features[j];
    b.y_lang[r] = s.language;
    b.y_fam[r] = ds.taxonomy.lang_to_family[s.language];
    b.y_enc[r] = s.encoding;
  }
  return b;
}

// Validation loss: the model's own objective with uniform weights, so the
// early-stopping signal is comparable across weighting schemes.
inline double validation_loss(const HausModel& m, const HausOutput& out,
                              const BatchView& val) {
  Vec ones(val.x.rows, 1.0);
  return model_loss(m, out, val.y_lang, val.y_fam, ones, ones);
}

}  // namespace detail

// Mini-batch ADADELTA training with generalization-loss early stopping and
// rollback-with-decay on every validation regression. Returns the model at
// the best validation loss seen, never the final epoch's.
inline TrainHistory train(HausModel& model, const Dataset& train_ds,
                          const Dataset& val_ds, const WeightTable& table,
                          const TrainConfig& cfg) {
  validate(cfg);
  if (train_ds.samples.empty()) fail_input("train: empty training set");
  if (val_ds.samples.empty()) fail_input("train: empty validation set");
  if (train_ds.dim != input_dim(model) || val_ds.dim != input_dim(model))
    fail_input("train: dataset dim ", train_ds.dim, "/", val_ds.dim,
               " does not match model input ", input_dim(model));
  if (train_ds.taxonomy.languages != model.taxonomy.languages ||
      val_ds.taxonomy.languages != model.taxonomy.languages ||
      train_ds.taxonomy.encodings != model.taxonomy.encodings)
    fail_input("train: dataset taxonomy does not match the model");
  model.eta = cfg.eta;
  validate(model);

  const std::size_t n = train_ds.size();
  Vec params = flatten_params(model);
  AdadeltaState state(params.size(), cfg.rho, cfg.epsilon);
  Rng shuffle_rng(sub_seed(cfg.seed, "shuffle"));
  GlStopper stopper(cfg.gl_threshold);
  TrainHistory history;
  ModelSnapshot best = checkpoint(model);

  std::vector<std::size_t> all_val(val_ds.size());
  for (std::size_t i = 0; i < all_val.size(); ++i) all_val[i] = i;
  detail::BatchView val_view =
      detail::gather_batch(val_ds, all_val, 0, all_val.size());
  std::vector<std::size_t> val_labels = language_labels(val_ds);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      std::size_t end = std::min(n, begin + cfg.batch_size);
      detail::BatchView batch = detail::gather_batch(train_ds, order, begin,
                                                     end);
      auto [w_fam, w_lang] = batch_weights(cfg.prior_mode, table, batch.y_enc,
                                           batch.y_fam, batch.y_lang);
      HausBackwardResult back = haus_backward(model, batch.x, batch.y_lang,
                                              batch.y_fam, cfg.eta, w_fam,
                                              w_lang);
      if (std::isnan(back.loss))
        fail_numeric("train: NaN loss at epoch ", epoch);
      Vec grads = flatten_grads(back.grads, params.size());
      adadelta_step(params, grads, state);
      unflatten_params(model, params);
      loss_sum += back.loss * double(end - begin);
    }
    double train_loss = loss_sum / double(n);
    HausOutput val_out = haus_forward(model, val_view.x);
    double val_loss = detail::validation_loss(model, val_out, val_view);
    double val_cost = c_primary(val_out.language_post, val_labels);

    GlStopper::Decision d = stopper.observe(epoch, val_loss);
    if (d.new_best) {
      best = checkpoint(model);
      history.best_epoch = epoch;
    } else if (d.regression) {
      rollback(model, best);
      params = flatten_params(model);
      state.scale *= cfg.decay;
      history.rollback_epochs.push_back(epoch);
    }
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    history.val_cost.push_back(val_cost);
    history.gl.push_back(d.gl);
    history.scale.push_back(state.scale);
    history.rolled_back.push_back(d.regression);
    if (log_level() >= 1)
      std::cout << "epoch " << epoch << " train " << train_loss << " val "
                << val_loss << " gl " << d.gl << " scale " << state.scale
                << (d.regression ? " rollback" : "") << "\n";
    if (d.stop) break;
  }
  rollback(model, best);
  return history;
}

}  // namespace lidkit
