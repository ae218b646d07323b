#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lsrc/cells.hpp"

// Model assembly: configuration, parameter collections, Glorot
// initialization, exact parameter counting, and running a model over token
// sequences in evaluation or training mode.

namespace lsrc {

enum class Arch { rnn, lstm, lsrc };

inline const char* arch_name(Arch a) {
  switch (a) {
    case Arch::rnn: return "rnn";
    case Arch::lstm: return "lstm";
    case Arch::lsrc: return "lsrc";
  }
  return "?";
}

inline std::optional<Arch> arch_from_name(const std::string& s) {
  if (s == "rnn") return Arch::rnn;
  if (s == "lstm") return Arch::lstm;
  if (s == "lsrc") return Arch::lsrc;
  return std::nullopt;
}

struct ModelConfig {
  Arch arch = Arch::lsrc;
  std::int64_t vocab_size = 0;
  std::int64_t embed_size = 0;
  std::int64_t hidden_size = 0;
  std::int64_t dense_size = 0;  // 0 = no dense layer

  // Dimension of the state fed to the output (or dense) layer.
  std::int64_t top_hidden() const { return hidden_size; }
  // Dimension of the activations entering the output weights.
  std::int64_t output_in() const { return dense_size > 0 ? dense_size : hidden_size; }

  void validate() const {
    if (vocab_size < 1 || embed_size < 1 || hidden_size < 1)
      throw UsageError("model config: vocab/embed/hidden sizes must be >= 1");
    if (dense_size < 0)
      throw UsageError("model config: dense size must be >= 0");
    if (arch == Arch::rnn && embed_size != hidden_size)
      throw UsageError("model config: rnn requires embed_size == hidden_size, got " +
                       std::to_string(embed_size) + " vs " + std::to_string(hidden_size));
  }
};

struct ModelParams {
  ModelConfig config;
  Matrix embedding;  // (vocab x embed)
  CellParams cell;
  Matrix dense;   // (hidden x dense), empty when config.dense_size == 0
  Matrix output;  // (output_in x vocab)

  bool has_dense() const { return config.dense_size > 0; }
};

// Gradient collections mirror the parameter collection shape for shape.
using Gradients = ModelParams;

namespace detail {
inline CellParams make_cell(const ModelConfig& c) {
  const auto e = static_cast<std::size_t>(c.embed_size);
  const auto h = static_cast<std::size_t>(c.hidden_size);
  switch (c.arch) {
    case Arch::rnn:
      return RnnParams{Matrix(h, h)};
    case Arch::lstm:
      return LstmParams{Matrix(e, h), Matrix(e, h), Matrix(e, h), Matrix(e, h),
                        Matrix(h, h), Matrix(h, h), Matrix(h, h), Matrix(h, h)};
    case Arch::lsrc:
      return LsrcParams{Matrix(e, e), Matrix(e, h), Matrix(e, h), Matrix(e, h),
                        Matrix(e, h), Matrix(h, h), Matrix(h, h), Matrix(h, h),
                        Matrix(h, h)};
  }
  return RnnParams{};
}
}  // namespace detail

inline ModelParams zeros_like(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  p.embedding = Matrix(static_cast<std::size_t>(config.vocab_size),
                       static_cast<std::size_t>(config.embed_size));
  p.cell = detail::make_cell(config);
  if (config.dense_size > 0)
    p.dense = Matrix(static_cast<std::size_t>(config.hidden_size),
                     static_cast<std::size_t>(config.dense_size));
  p.output = Matrix(static_cast<std::size_t>(config.output_in()),
                    static_cast<std::size_t>(config.vocab_size));
  return p;
}

struct NamedMatrix {
  std::string name;
  Matrix* matrix;
};

// Canonical matrix order. Checkpoint layout and initialization order both
// follow this list, so it must stay stable.
inline std::vector<NamedMatrix> matrix_list(ModelParams& p) {
  std::vector<NamedMatrix> out;
  out.push_back({"embedding", &p.embedding});
  if (auto* r = std::get_if<RnnParams>(&p.cell)) {
    out.push_back({"rnn.w_hh", &r->w_hh});
  } else if (auto* l = std::get_if<LstmParams>(&p.cell)) {
    out.push_back({"lstm.w_xi", &l->w_xi});
    out.push_back({"lstm.w_xf", &l->w_xf});
    out.push_back({"lstm.w_xo", &l->w_xo});
    out.push_back({"lstm.w_xc", &l->w_xc});
    out.push_back({"lstm.w_hi", &l->w_hi});
    out.push_back({"lstm.w_hf", &l->w_hf});
    out.push_back({"lstm.w_ho", &l->w_ho});
    out.push_back({"lstm.w_hc", &l->w_hc});
  } else if (auto* s = std::get_if<LsrcParams>(&p.cell)) {
    out.push_back({"lsrc.w_ll", &s->w_ll});
    out.push_back({"lsrc.w_li", &s->w_li});
    out.push_back({"lsrc.w_lf", &s->w_lf});
    out.push_back({"lsrc.w_lo", &s->w_lo});
    out.push_back({"lsrc.w_lc", &s->w_lc});
    out.push_back({"lsrc.w_gi", &s->w_gi});
    out.push_back({"lsrc.w_gf", &s->w_gf});
    out.push_back({"lsrc.w_go", &s->w_go});
    out.push_back({"lsrc.w_gc", &s->w_gc});
  }
  if (p.has_dense()) out.push_back({"dense.w", &p.dense});
  out.push_back({"output.w", &p.output});
  return out;
}

inline std::vector<NamedMatrix> matrix_list(const ModelParams& p) {
  return matrix_list(const_cast<ModelParams&>(p));
}

// Exact trainable-element count for a configuration.
inline std::int64_t count_params(const ModelConfig& c) {
  c.validate();
  const std::int64_t v = c.vocab_size, e = c.embed_size, h = c.hidden_size;
  std::int64_t n = v * e;  // embedding
  switch (c.arch) {
    case Arch::rnn: n += h * h; break;
    case Arch::lstm: n += 4 * e * h + 4 * h * h; break;
    case Arch::lsrc: n += e * e + 4 * e * h + 4 * h * h; break;
  }
  if (c.dense_size > 0) n += h * c.dense_size;
  n += c.output_in() * v;  // output layer
  return n;
}

// Glorot (normalized uniform) initialization: each matrix is drawn uniform in
// +-sqrt(6 / (fan_in + fan_out)) with fan_in = rows and fan_out = cols.
// Draws use a fixed 53-bit mapping from std::mt19937_64 so a seed pins every
// bit of the result.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros_like(config);
  std::mt19937_64 rng(seed);
  auto u01 = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
  };
  for (auto& nm : matrix_list(p)) {
    Matrix& m = *nm.matrix;
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    for (double& v : m.data) v = (2.0 * u01() - 1.0) * limit;
  }
  return p;
}

inline StepState zero_state(const ModelConfig& c, std::size_t batch) {
  const auto e = static_cast<std::size_t>(c.embed_size);
  const auto h = static_cast<std::size_t>(c.hidden_size);
  switch (c.arch) {
    case Arch::rnn: return RnnState{Matrix(batch, h)};
    case Arch::lstm: return LstmState{Matrix(batch, h), Matrix(batch, h)};
    case Arch::lsrc: return LsrcState{Matrix(batch, e), Matrix(batch, h), Matrix(batch, h)};
  }
  return RnnState{};
}

// State component fed to the dense/output layers.
inline const Matrix& top_hidden(const StepState& s) {
  if (auto* r = std::get_if<RnnState>(&s)) return r->h;
  if (auto* l = std::get_if<LstmState>(&s)) return l->h;
  return std::get<LsrcState>(s).h_global;
}

// Forward pass over a (batch x steps) token block. probs[t] holds the
// next-word distribution after consuming column t. Caches are recorded only
// in training mode; the final state supports cross-window carryover.
struct SequenceResult {
  std::vector<Matrix> probs;
  StepState final_state;
  // training-mode caches, one entry per step
  std::vector<StepCache> cell_caches;
  std::vector<Matrix> top_in;     // state fed to dense/output per step
  std::vector<Matrix> dense_out;  // dense activations per step (if dense)
};

inline SequenceResult forward_sequence(const ModelParams& p, const TokenMatrix& tokens,
                                       const StepState& init, bool training) {
  const std::size_t steps = tokens.cols;
  SequenceResult res;
  res.probs.reserve(steps);
  if (training) {
    res.cell_caches.reserve(steps);
    res.top_in.reserve(steps);
    if (p.has_dense()) res.dense_out.reserve(steps);
  }

  StepState state = init;
  std::vector<TokenId> col(tokens.rows);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < tokens.rows; ++b) col[b] = tokens.at(b, t);
    Matrix x = embed_lookup(p.embedding, col);

    if (auto* rp = std::get_if<RnnParams>(&p.cell)) {
      RnnCache cache;
      auto next = rnn_step(*rp, x, std::get<RnnState>(state), training ? &cache : nullptr);
      if (training) res.cell_caches.push_back(std::move(cache));
      state = std::move(next);
    } else if (auto* lp = std::get_if<LstmParams>(&p.cell)) {
      LstmCache cache;
      auto next = lstm_step(*lp, x, std::get<LstmState>(state), training ? &cache : nullptr);
      if (training) res.cell_caches.push_back(std::move(cache));
      state = std::move(next);
    } else {
      LsrcCache cache;
      auto next = lsrc_step(std::get<LsrcParams>(p.cell), x, std::get<LsrcState>(state),
                            training ? &cache : nullptr);
      if (training) res.cell_caches.push_back(std::move(cache));
      state = std::move(next);
    }

    const Matrix& top = top_hidden(state);
    if (p.has_dense()) {
      Matrix d = dense_relu_step(p.dense, top);
      res.probs.push_back(output_step(p.output, d));
      if (training) {
        res.top_in.push_back(top);
        res.dense_out.push_back(std::move(d));
      }
    } else {
      res.probs.push_back(output_step(p.output, top));
      if (training) res.top_in.push_back(top);
    }
  }
  res.final_state = std::move(state);
  return res;
}

// Sum of -log p(target) over a window of per-step distributions.
inline double sequence_nll(const std::vector<Matrix>& probs, const TokenMatrix& targets) {
  if (probs.size() != targets.cols)
    throw DimensionError("sequence_nll: " + std::to_string(probs.size()) +
                         " prob steps vs " + std::to_string(targets.cols) + " target steps");
  double nll = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const Matrix& pr = probs[t];
    for (std::size_t b = 0; b < pr.rows; ++b) {
      const TokenId id = targets.at(b, t);
      if (id < 0 || static_cast<std::size_t>(id) >= pr.cols)
        throw IndexError("sequence_nll: target id " + std::to_string(id) + " out of range");
      nll -= std::log(pr.at(b, static_cast<std::size_t>(id)));
    }
  }
  return nll;
}

// Backward pass of the summed window cross-entropy. Accumulates into `grads`
// (embedding rows only for consumed ids) and returns the gradient with
// respect to the window's entry state, which truncated BPTT discards.
inline StepState backward_sequence(const ModelParams& p, const SequenceResult& fwd,
                                   const TokenMatrix& inputs, const TokenMatrix& targets,
                                   Gradients& grads) {
  const std::size_t steps = fwd.probs.size();
  if (fwd.cell_caches.size() != steps)
    throw UsageError("backward_sequence: forward pass was not run in training mode");
  const std::size_t batch = inputs.rows;

  StepState dstate = zero_state(p.config, batch);
  std::vector<TokenId> col(batch);
  for (std::size_t t = steps; t-- > 0;) {
    // Softmax + cross-entropy: dlogits = probs - onehot(target).
    Matrix dlogits = fwd.probs[t];
    for (std::size_t b = 0; b < batch; ++b)
      dlogits.at(b, static_cast<std::size_t>(targets.at(b, t))) -= 1.0;

    Matrix dtop;
    if (p.has_dense()) {
      matmul_tn_acc(grads.output, fwd.dense_out[t], dlogits);
      Matrix dd = matmul_nt(dlogits, p.output);
      Matrix da = ewise(dd, map(fwd.dense_out[t], Unary::drelu), Binary::hadamard);
      matmul_tn_acc(grads.dense, fwd.top_in[t], da);
      dtop = matmul_nt(da, p.dense);
    } else {
      matmul_tn_acc(grads.output, fwd.top_in[t], dlogits);
      dtop = matmul_nt(dlogits, p.output);
    }

    Matrix dx;
    if (auto* rp = std::get_if<RnnParams>(&p.cell)) {
      auto& dprev = std::get<RnnState>(dstate);
      Matrix dh = std::move(dprev.h);
      add_inplace(dh, dtop);
      RnnState next_dprev{};
      dx = rnn_step_backward(*rp, std::get<RnnCache>(fwd.cell_caches[t]), dh,
                             std::get<RnnParams>(grads.cell), next_dprev);
      dstate = std::move(next_dprev);
    } else if (auto* lp = std::get_if<LstmParams>(&p.cell)) {
      auto& dprev = std::get<LstmState>(dstate);
      Matrix dh = std::move(dprev.h);
      add_inplace(dh, dtop);
      LstmState next_dprev{};
      dx = lstm_step_backward(*lp, std::get<LstmCache>(fwd.cell_caches[t]), dh, dprev.c,
                              std::get<LstmParams>(grads.cell), next_dprev);
      dstate = std::move(next_dprev);
    } else {
      auto& dprev = std::get<LsrcState>(dstate);
      Matrix dh = std::move(dprev.h_global);
      add_inplace(dh, dtop);
      LsrcState next_dprev{};
      dx = lsrc_step_backward(std::get<LsrcParams>(p.cell),
                              std::get<LsrcCache>(fwd.cell_caches[t]), dprev.h_local, dh,
                              dprev.c, std::get<LsrcParams>(grads.cell), next_dprev);
      dstate = std::move(next_dprev);
    }

    // Sparse embedding update: only consumed rows receive gradient.
    for (std::size_t b = 0; b < batch; ++b) {
      const auto id = static_cast<std::size_t>(inputs.at(b, t));
      double* dst = grads.embedding.row(id);
      const double* src = dx.row(b);
      for (std::size_t j = 0; j < dx.cols; ++j) dst[j] += src[j];
    }
  }
  return dstate;
}

// Mean per-token negative log-likelihood over one id sequence, state carried
// from zeros across the whole sequence. Predictions cover positions
// 1..len-1, so len-1 tokens are scored. Runs in bounded memory by chunking;
// chunk boundaries do not change the result because state carryover is exact.
inline double sequence_mean_nll(const ModelParams& p, std::span<const TokenId> ids,
                                std::size_t chunk = 256) {
  if (ids.size() < 2)
    throw UsageError("evaluation needs at least 2 tokens, got " +
                     std::to_string(ids.size()));
  const std::size_t total = ids.size() - 1;
  StepState state = zero_state(p.config, 1);
  double nll = 0.0;
  for (std::size_t pos = 0; pos < total;) {
    const std::size_t w = std::min(chunk, total - pos);
    TokenMatrix in(1, w), tg(1, w);
    for (std::size_t t = 0; t < w; ++t) {
      in.at(0, t) = ids[pos + t];
      tg.at(0, t) = ids[pos + t + 1];
    }
    SequenceResult res = forward_sequence(p, in, state, false);
    nll += sequence_nll(res.probs, tg);
    state = std::move(res.final_state);
    pos += w;
  }
  return nll / static_cast<double>(total);
}

}  // namespace lsrc
