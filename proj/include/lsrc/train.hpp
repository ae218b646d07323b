#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "lsrc/data.hpp"
#include "lsrc/model.hpp"

// Truncated-BPTT training: SGD with momentum and weight decay, the
// validation-driven learning-rate halving schedule, and a finite-difference
// gradient-check harness for the hand-written backward passes.

namespace lsrc {

struct TrainConfig {
  double lr0 = 1.0;
  double momentum = 0.0;  // the recurrent presets train without momentum
  double weight_decay = 5e-5;
  std::int64_t batch_size = 200;
  std::int64_t bptt_steps = 5;
  // Relative validation log-likelihood gain below which an epoch counts as
  // "no significant improvement" and the halving phase starts.
  double improve_threshold = 1e-3;
  std::int64_t max_post_halving_epochs = 7;
  std::int64_t max_epochs = 0;  // 0 = run until the schedule stops
  double clip_norm = 0.0;       // 0 = no gradient clipping
  std::uint64_t seed = 1;

  void validate() const {
    if (lr0 <= 0.0) throw UsageError("train config: lr0 must be > 0");
    if (bptt_steps < 1) throw UsageError("train config: bptt_steps must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0)
      throw UsageError("train config: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw UsageError("train config: weight_decay must be >= 0");
    if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
    if (max_post_halving_epochs < 0 || clip_norm < 0.0 || max_epochs < 0)
      throw UsageError("train config: negative value where none is allowed");
  }
};

struct OptState {
  ModelParams velocity;  // mirrors parameter shapes
  double lr = 0.0;
  std::int64_t epoch = 0;
  double best_valid_loglik = -std::numeric_limits<double>::infinity();
  bool halving = false;
  std::int64_t halvings = 0;
};

inline OptState make_opt_state(const ModelConfig& model_cfg, const TrainConfig& cfg) {
  cfg.validate();
  OptState opt;
  opt.velocity = zeros_like(model_cfg);
  opt.lr = cfg.lr0;
  return opt;
}

// v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v
// Weight decay applies to every weight matrix, embedding included.
inline void sgd_update(ModelParams& params, const Gradients& grads, OptState& opt,
                       const TrainConfig& cfg) {
  auto pm = matrix_list(params);
  auto gm = matrix_list(grads);
  auto vm = matrix_list(opt.velocity);
  for (std::size_t k = 0; k < pm.size(); ++k) {
    Matrix& w = *pm[k].matrix;
    const Matrix& g = *gm[k].matrix;
    Matrix& v = *vm[k].matrix;
    require_same_shape(w, g, "sgd_update");
    require_same_shape(w, v, "sgd_update");
    for (std::size_t i = 0; i < w.size(); ++i) {
      v.data[i] = cfg.momentum * v.data[i] -
                  opt.lr * (g.data[i] + cfg.weight_decay * w.data[i]);
      w.data[i] += v.data[i];
    }
  }
}

inline double grad_global_norm(const Gradients& grads) {
  double sq = 0.0;
  for (const auto& nm : matrix_list(grads))
    for (double v : nm.matrix->data) sq += v * v;
  return std::sqrt(sq);
}

inline void clip_gradients(Gradients& grads, double max_norm) {
  const double norm = grad_global_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (auto& nm : matrix_list(grads))
    for (double& v : nm.matrix->data) v *= scale;
}

// One pass over the batched corpus: consecutive windows of bptt_steps tokens
// per stream, loss summed over the window, one SGD update per window. State
// values carry across windows; gradients do not cross window boundaries.
// Returns the mean per-token training cross-entropy in nats.
inline double train_epoch(ModelParams& params, OptState& opt, const BatchedCorpus& corpus,
                          const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t len = corpus.stream_length();
  if (len < 2)
    throw UsageError("train_epoch: streams of length " + std::to_string(len) +
                     " cannot form any prediction");
  const auto tau = static_cast<std::size_t>(cfg.bptt_steps);

  Gradients grads = zeros_like(params.config);
  StepState state = zero_state(params.config, corpus.batch_size());
  double nll_sum = 0.0;
  std::size_t tokens = 0;

  for (std::size_t pos = 0; pos < len - 1;) {
    const std::size_t w = std::min(tau, len - 1 - pos);
    TokenMatrix inputs = corpus.streams.slice_cols(pos, pos + w);
    TokenMatrix targets = corpus.streams.slice_cols(pos + 1, pos + 1 + w);

    SequenceResult fwd = forward_sequence(params, inputs, state, true);
    nll_sum += sequence_nll(fwd.probs, targets);
    tokens += w * corpus.batch_size();

    for (auto& nm : matrix_list(grads)) nm.matrix->set_zero();
    backward_sequence(params, fwd, inputs, targets, grads);
    if (cfg.clip_norm > 0.0) clip_gradients(grads, cfg.clip_norm);
    sgd_update(params, grads, opt, cfg);

    state = std::move(fwd.final_state);  // values carry, gradients were cut
    pos += w;
  }
  opt.epoch += 1;
  return nll_sum / static_cast<double>(tokens);
}

// Called once per epoch end with the epoch's validation log-likelihood.
// Phase 1 keeps the learning rate while the relative improvement over the
// best seen value exceeds the threshold; the first violation starts phase 2,
// which halves the rate each epoch and stops after max_post_halving_epochs.
// Returns (learning rate for the next epoch, stop flag).
inline std::pair<double, bool> lr_schedule_step(OptState& opt, double valid_loglik,
                                                const TrainConfig& cfg) {
  const double best = opt.best_valid_loglik;
  bool significant;
  if (!std::isfinite(best)) {
    significant = true;  // first epoch
  } else {
    const double denom = std::max(std::abs(best), 1e-12);
    significant = (valid_loglik - best) / denom > cfg.improve_threshold;
  }
  opt.best_valid_loglik = std::max(opt.best_valid_loglik, valid_loglik);

  if (!opt.halving) {
    if (significant) return {opt.lr, false};
    opt.halving = true;
    opt.halvings = 1;
    opt.lr *= 0.5;
    return {opt.lr, cfg.max_post_halving_epochs == 0};
  }
  if (opt.halvings >= cfg.max_post_halving_epochs) return {opt.lr, true};
  opt.halvings += 1;
  opt.lr *= 0.5;
  return {opt.lr, false};
}

struct EpochStats {
  std::int64_t epoch = 0;
  double train_ce = 0.0;       // mean nats per token
  double valid_loglik = 0.0;   // mean log-likelihood per token
  double lr = 0.0;             // rate the epoch ran with
  bool improved_best = false;  // validation log-likelihood beat the best so far
};

// Drives train_epoch and the schedule until the schedule stops or max_epochs
// is reached. The callback sees every finished epoch (for logging and
// checkpointing). Throws NumericError on a non-finite training loss.
inline std::vector<EpochStats> run_training(
    ModelParams& params, OptState& opt, const BatchedCorpus& train_corpus,
    std::span<const TokenId> valid_ids, const TrainConfig& cfg,
    const std::function<void(const EpochStats&)>& per_epoch = nullptr) {
  std::vector<EpochStats> history;
  double best_seen = -std::numeric_limits<double>::infinity();
  for (std::int64_t e = 1; cfg.max_epochs == 0 || e <= cfg.max_epochs; ++e) {
    EpochStats st;
    st.epoch = e;
    st.lr = opt.lr;
    st.train_ce = train_epoch(params, opt, train_corpus, cfg);
    if (!std::isfinite(st.train_ce))
      throw NumericError("diverged at epoch " + std::to_string(e));
    st.valid_loglik = -sequence_mean_nll(params, valid_ids);
    st.improved_best = st.valid_loglik > best_seen;
    best_seen = std::max(best_seen, st.valid_loglik);
    auto [_, stop] = lr_schedule_step(opt, st.valid_loglik, cfg);
    history.push_back(st);
    if (per_epoch) per_epoch(st);
    if (stop) break;
  }
  return history;
}

// Finite-difference gradient check for one architecture. Runs a training
// window on random tokens and compares every analytic parameter gradient
// against centered differences of the window loss.
struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool pass = false;
};

inline GradCheckReport gradient_check(const ModelConfig& config, std::uint64_t seed,
                                      double tolerance, std::size_t batch = 3,
                                      std::size_t steps = 5, double epsilon = 1e-5) {
  ModelParams params = init_params(config, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  TokenMatrix inputs(batch, steps), targets(batch, steps);
  for (auto& id : inputs.ids) id = static_cast<TokenId>(rng() % config.vocab_size);
  for (auto& id : targets.ids) id = static_cast<TokenId>(rng() % config.vocab_size);
  const StepState init = zero_state(config, batch);

  auto window_loss = [&]() {
    SequenceResult fwd = forward_sequence(params, inputs, init, false);
    return sequence_nll(fwd.probs, targets);
  };

  Gradients grads = zeros_like(config);
  SequenceResult fwd = forward_sequence(params, inputs, init, true);
  backward_sequence(params, fwd, inputs, targets, grads);

  GradCheckReport report;
  auto pm = matrix_list(params);
  auto gm = matrix_list(grads);
  for (std::size_t k = 0; k < pm.size(); ++k) {
    Matrix& w = *pm[k].matrix;
    const Matrix& g = *gm[k].matrix;
    GradCheckEntry entry{pm[k].name, 0.0};
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w.data[i];
      w.data[i] = saved + epsilon;
      const double lp = window_loss();
      w.data[i] = saved - epsilon;
      const double lm = window_loss();
      w.data[i] = saved;
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double analytic = g.data[i];
      const double denom = std::max(std::abs(numeric) + std::abs(analytic), 1e-6);
      entry.max_rel_err = std::max(entry.max_rel_err, std::abs(numeric - analytic) / denom);
    }
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.worst < tolerance;
  return report;
}

}  // namespace lsrc
