#pragma once

#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <span>
#include <utility>
#include <vector>

#include "lsrc/model.hpp"

// Evaluation and diagnostics: perplexity, temporal correlation of hidden
// states over a distance, and word trigger correlation over a distance.

namespace lsrc {

// exp of the mean per-token negative log-likelihood. State is carried from
// zeros across the whole sequence, the first token is only consumed as
// input, so len(ids) - 1 tokens are scored (eos and unk included).
inline double perplexity(const ModelParams& params, std::span<const TokenId> ids) {
  return std::exp(sequence_mean_nll(params, ids));
}

struct CorrelationCurve {
  std::vector<int> distances;
  std::vector<double> values;
};

// Which per-step state component to record.
enum class StateKind { h, h_local, h_global, cell };

inline const char* state_kind_name(StateKind k) {
  switch (k) {
    case StateKind::h: return "H";
    case StateKind::h_local: return "H_l";
    case StateKind::h_global: return "H_g";
    case StateKind::cell: return "C";
  }
  return "?";
}

namespace detail {

inline std::vector<double> state_row(const StepState& s, StateKind kind, Arch arch) {
  const Matrix* m = nullptr;
  switch (arch) {
    case Arch::rnn:
      if (kind == StateKind::h) m = &std::get<RnnState>(s).h;
      break;
    case Arch::lstm:
      if (kind == StateKind::h) m = &std::get<LstmState>(s).h;
      if (kind == StateKind::cell) m = &std::get<LstmState>(s).c;
      break;
    case Arch::lsrc: {
      const auto& st = std::get<LsrcState>(s);
      if (kind == StateKind::h_local) m = &st.h_local;
      if (kind == StateKind::h_global) m = &st.h_global;
      if (kind == StateKind::cell) m = &st.c;
      break;
    }
  }
  if (!m)
    throw UsageError(std::string("state ") + state_kind_name(kind) +
                     " does not exist for arch " + arch_name(arch));
  return m->data;
}

// Zero vectors count as similarity 0 so every position contributes.
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

// Mean cosine similarity between the chosen state at step t and step t + d,
// over all valid t; the model runs once over ids (every id consumed as
// input, batch 1) and states stream through a ring buffer of max distance.
inline CorrelationCurve temporal_correlation(const ModelParams& params,
                                             std::span<const TokenId> ids,
                                             const std::vector<int>& distances,
                                             StateKind which) {
  if (ids.empty()) throw UsageError("temporal_correlation: empty id sequence");
  int max_d = 0;
  for (int d : distances) {
    if (d < 0) throw UsageError("temporal_correlation: negative distance");
    max_d = std::max(max_d, d);
  }
  if (static_cast<std::size_t>(max_d) >= ids.size())
    throw UsageError("temporal_correlation: distance " + std::to_string(max_d) +
                     " >= sequence length " + std::to_string(ids.size()));
  // Validate the state/arch combination up front.
  detail::state_row(zero_state(params.config, 1), which, params.config.arch);

  std::vector<double> sums(distances.size(), 0.0);
  std::vector<std::int64_t> counts(distances.size(), 0);
  std::deque<std::vector<double>> window;  // last max_d + 1 states

  StepState state = zero_state(params.config, 1);
  TokenMatrix one(1, 1);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    one.at(0, 0) = ids[t];
    SequenceResult res = forward_sequence(params, one, state, false);
    state = std::move(res.final_state);
    window.push_back(detail::state_row(state, which, params.config.arch));
    if (window.size() > static_cast<std::size_t>(max_d) + 1) window.pop_front();
    for (std::size_t k = 0; k < distances.size(); ++k) {
      const auto d = static_cast<std::size_t>(distances[k]);
      if (t >= d) {
        sums[k] += detail::cosine(window[window.size() - 1 - d], window.back());
        counts[k] += 1;
      }
    }
  }

  CorrelationCurve curve;
  curve.distances = distances;
  for (std::size_t k = 0; k < distances.size(); ++k)
    curve.values.push_back(sums[k] / static_cast<double>(counts[k]));
  return curve;
}

// Unigram statistics of an id sequence.
struct TriggerStats {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  double prob(TokenId w) const {
    if (w < 0 || static_cast<std::size_t>(w) >= counts.size())
      throw IndexError("trigger stats: id " + std::to_string(w) + " out of range");
    return static_cast<double>(counts[static_cast<std::size_t>(w)]) /
           static_cast<double>(total);
  }
};

inline TriggerStats build_trigger_stats(std::span<const TokenId> ids) {
  if (ids.empty()) throw UsageError("trigger stats: empty id sequence");
  TriggerStats st;
  TokenId max_id = 0;
  for (TokenId id : ids) max_id = std::max(max_id, id);
  st.counts.assign(static_cast<std::size_t>(max_id) + 1, 0);
  for (TokenId id : ids) ++st.counts[static_cast<std::size_t>(id)];
  st.total = static_cast<std::int64_t>(ids.size());
  return st;
}

// c_d(w1, w2) = P_d(w1, w2) / (P(w1) P(w2)) where P_d counts w2 exactly d
// positions after w1 over the N - d valid positions. Values above 1 mean
// attraction beyond chance.
inline CorrelationCurve trigger_correlation_pair(std::span<const TokenId> ids,
                                                 const TriggerStats& stats, TokenId w1,
                                                 TokenId w2,
                                                 const std::vector<int>& distances) {
  const double p1 = stats.prob(w1);
  const double p2 = stats.prob(w2);
  if (p1 == 0.0 || p2 == 0.0)
    throw UsageError("trigger correlation undefined: token " +
                     std::to_string(p1 == 0.0 ? w1 : w2) + " never occurs");
  CorrelationCurve curve;
  curve.distances = distances;
  const auto n = static_cast<std::int64_t>(ids.size());
  for (int d : distances) {
    if (d < 1 || static_cast<std::int64_t>(d) >= n)
      throw UsageError("trigger correlation: distance " + std::to_string(d) +
                       " outside [1, " + std::to_string(n) + ")");
    std::int64_t joint = 0;
    for (std::int64_t t = 0; t + d < n; ++t)
      if (ids[static_cast<std::size_t>(t)] == w1 &&
          ids[static_cast<std::size_t>(t + d)] == w2)
        ++joint;
    const double pd = static_cast<double>(joint) / static_cast<double>(n - d);
    curve.values.push_back(pd / (p1 * p2));
  }
  return curve;
}

inline std::vector<CorrelationCurve> trigger_correlation(
    std::span<const TokenId> ids, const std::vector<std::pair<TokenId, TokenId>>& pairs,
    const std::vector<int>& distances) {
  TriggerStats stats = build_trigger_stats(ids);
  std::vector<CorrelationCurve> out;
  out.reserve(pairs.size());
  for (const auto& [w1, w2] : pairs)
    out.push_back(trigger_correlation_pair(ids, stats, w1, w2, distances));
  return out;
}

// Two-column TSV: "# d\tvalue" header then one row per distance.
inline void emit_curve(const CorrelationCurve& curve, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "# d\tvalue\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", curve.values[i]);
    os << curve.distances[i] << '\t' << buf << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace lsrc
