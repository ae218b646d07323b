#pragma once

#include <span>
#include <variant>

#include "lsrc/matrix.hpp"

// One-timestep forward and backward passes for the three recurrent cells
// (Elman RNN, LSTM, LSRC), plus embedding lookup, the optional dense ReLU
// layer and the softmax output layer.
//
// Orientation convention, fixed once for the whole library and for the
// checkpoint format: activations are (batch x dim) matrices with one example
// per row, and every weight matrix multiplies on the RIGHT, i.e. a layer
// computes h * W with W stored as (in_dim x out_dim). None of the cells use
// bias terms.
//
// Cell equations (f = tanh, gates use the logistic sigmoid):
//   RNN    h_t = f(x_t + h_{t-1} W_hh)
//   LSTM   {i,f,o}_t = sigmoid(x_t W_x* + h_{t-1} W_h*)
//          cand_t    = f(x_t W_xc + h_{t-1} W_hc)
//          c_t = f_t . c_{t-1} + i_t . cand_t,   h_t = o_t . f(c_t)
//   LSRC   hl_t = f(x_t + hl_{t-1} W_ll)                  (local state)
//          {i,f,o}_t = sigmoid(hl_t W_l* + hg_{t-1} W_g*)
//          cand_t    = f(hl_t W_lc + hg_{t-1} W_gc)
//          c_t = f_t . c_{t-1} + i_t . cand_t,   hg_t = o_t . f(c_t)
// Note the LSRC gates read the CURRENT local state hl_t, not the input.
// Because the RNN and LSRC local recurrences add x_t without a projection,
// the RNN hidden size and the LSRC local-state size both equal the
// embedding size.

namespace lsrc {

struct RnnParams {
  Matrix w_hh;  // (hidden x hidden) recurrent weights, hidden == embed
};

struct LstmParams {
  Matrix w_xi, w_xf, w_xo, w_xc;  // (embed x hidden) input weights per gate
  Matrix w_hi, w_hf, w_ho, w_hc;  // (hidden x hidden) recurrent weights per gate
};

struct LsrcParams {
  Matrix w_ll;                    // (embed x embed) local-state recurrence
  Matrix w_li, w_lf, w_lo, w_lc;  // (embed x hidden) local state -> gates
  Matrix w_gi, w_gf, w_go, w_gc;  // (hidden x hidden) global state -> gates
};

using CellParams = std::variant<RnnParams, LstmParams, LsrcParams>;

struct RnnState {
  Matrix h;
};

struct LstmState {
  Matrix h, c;
};

struct LsrcState {
  Matrix h_local, h_global, c;
};

using StepState = std::variant<RnnState, LstmState, LsrcState>;

// Intermediate activations of one forward step, kept only in training mode.
struct RnnCache {
  Matrix h_prev, h;
};

struct LstmCache {
  Matrix x, h_prev, c_prev;
  Matrix gate_i, gate_f, gate_o, cand, c, c_tanh;
};

struct LsrcCache {
  Matrix h_local_prev, h_local, h_global_prev, c_prev;
  Matrix gate_i, gate_f, gate_o, cand, c, c_tanh;
};

using StepCache = std::variant<RnnCache, LstmCache, LsrcCache>;

// Rows of `table` gathered into a (batch x embed) matrix.
inline Matrix embed_lookup(const Matrix& table, std::span<const TokenId> ids) {
  Matrix out(ids.size(), table.cols);
  for (std::size_t b = 0; b < ids.size(); ++b) {
    const TokenId id = ids[b];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows)
      throw IndexError("embed_lookup: id " + std::to_string(id) +
                       " out of range [0, " + std::to_string(table.rows) + ")");
    const double* src = table.row(static_cast<std::size_t>(id));
    std::copy(src, src + table.cols, out.row(b));
  }
  return out;
}

inline RnnState rnn_step(const RnnParams& p, const Matrix& x, const RnnState& prev,
                         RnnCache* cache = nullptr) {
  Matrix z = matmul(prev.h, p.w_hh);
  add_inplace(z, x);
  RnnState next{map(z, Unary::tanh)};
  if (cache) {
    cache->h_prev = prev.h;
    cache->h = next.h;
  }
  return next;
}

inline LstmState lstm_step(const LstmParams& p, const Matrix& x, const LstmState& prev,
                           LstmCache* cache = nullptr) {
  auto gate_pre = [&](const Matrix& wx, const Matrix& wh) {
    Matrix z = matmul(x, wx);
    matmul_acc(z, prev.h, wh);
    return z;
  };
  Matrix gi = map(gate_pre(p.w_xi, p.w_hi), Unary::sigmoid);
  Matrix gf = map(gate_pre(p.w_xf, p.w_hf), Unary::sigmoid);
  Matrix go = map(gate_pre(p.w_xo, p.w_ho), Unary::sigmoid);
  Matrix cand = map(gate_pre(p.w_xc, p.w_hc), Unary::tanh);

  Matrix c = ewise(gf, prev.c, Binary::hadamard);
  add_inplace(c, ewise(gi, cand, Binary::hadamard));
  Matrix c_tanh = map(c, Unary::tanh);
  Matrix h = ewise(go, c_tanh, Binary::hadamard);

  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->gate_i = gi;
    cache->gate_f = gf;
    cache->gate_o = go;
    cache->cand = cand;
    cache->c = c;
    cache->c_tanh = c_tanh;
  }
  return LstmState{std::move(h), std::move(c)};
}

inline LsrcState lsrc_step(const LsrcParams& p, const Matrix& x, const LsrcState& prev,
                           LsrcCache* cache = nullptr) {
  Matrix zl = matmul(prev.h_local, p.w_ll);
  add_inplace(zl, x);
  Matrix h_local = map(zl, Unary::tanh);

  auto gate_pre = [&](const Matrix& wl, const Matrix& wg) {
    Matrix z = matmul(h_local, wl);
    matmul_acc(z, prev.h_global, wg);
    return z;
  };
  Matrix gi = map(gate_pre(p.w_li, p.w_gi), Unary::sigmoid);
  Matrix gf = map(gate_pre(p.w_lf, p.w_gf), Unary::sigmoid);
  Matrix go = map(gate_pre(p.w_lo, p.w_go), Unary::sigmoid);
  Matrix cand = map(gate_pre(p.w_lc, p.w_gc), Unary::tanh);

  Matrix c = ewise(gf, prev.c, Binary::hadamard);
  add_inplace(c, ewise(gi, cand, Binary::hadamard));
  Matrix c_tanh = map(c, Unary::tanh);
  Matrix h_global = ewise(go, c_tanh, Binary::hadamard);

  if (cache) {
    cache->h_local_prev = prev.h_local;
    cache->h_local = h_local;
    cache->h_global_prev = prev.h_global;
    cache->c_prev = prev.c;
    cache->gate_i = gi;
    cache->gate_f = gf;
    cache->gate_o = go;
    cache->cand = cand;
    cache->c = c;
    cache->c_tanh = c_tanh;
  }
  return LsrcState{std::move(h_local), std::move(h_global), std::move(c)};
}

// relu(h * w)
inline Matrix dense_relu_step(const Matrix& w, const Matrix& h) {
  return map(matmul(h, w), Unary::relu);
}

// softmax over the full vocabulary, no class factorization
inline Matrix output_step(const Matrix& w, const Matrix& h) {
  return softmax_rows(matmul(h, w));
}

// Backward passes. Each consumes the gradients of the window loss with
// respect to this step's outputs, accumulates parameter gradients into
// `grad` (shapes mirror the params), and returns the gradient with respect
// to the step input x plus the gradients to pass to the previous step.

inline Matrix rnn_step_backward(const RnnParams& p, const RnnCache& cache,
                                const Matrix& dh, RnnParams& grad, RnnState& dprev) {
  // h = tanh(x + h_prev W), dz = dh . (1 - h^2)
  Matrix dz = ewise(dh, map(cache.h, Unary::dtanh), Binary::hadamard);
  matmul_tn_acc(grad.w_hh, cache.h_prev, dz);
  dprev.h = matmul_nt(dz, p.w_hh);
  return dz;  // dx == dz
}

inline Matrix lstm_step_backward(const LstmParams& p, const LstmCache& cache,
                                 const Matrix& dh, const Matrix& dc_in,
                                 LstmParams& grad, LstmState& dprev) {
  Matrix dgo = ewise(dh, cache.c_tanh, Binary::hadamard);
  // dc = dc_in + dh . o . (1 - tanh(c)^2)
  Matrix dc = ewise(ewise(dh, cache.gate_o, Binary::hadamard),
                    map(cache.c_tanh, Unary::dtanh), Binary::hadamard);
  add_inplace(dc, dc_in);

  Matrix dgi = ewise(dc, cache.cand, Binary::hadamard);
  Matrix dgf = ewise(dc, cache.c_prev, Binary::hadamard);
  Matrix dcand = ewise(dc, cache.gate_i, Binary::hadamard);
  dprev.c = ewise(dc, cache.gate_f, Binary::hadamard);

  Matrix dzi = ewise(dgi, map(cache.gate_i, Unary::dsigmoid), Binary::hadamard);
  Matrix dzf = ewise(dgf, map(cache.gate_f, Unary::dsigmoid), Binary::hadamard);
  Matrix dzo = ewise(dgo, map(cache.gate_o, Unary::dsigmoid), Binary::hadamard);
  Matrix dzc = ewise(dcand, map(cache.cand, Unary::dtanh), Binary::hadamard);

  matmul_tn_acc(grad.w_xi, cache.x, dzi);
  matmul_tn_acc(grad.w_xf, cache.x, dzf);
  matmul_tn_acc(grad.w_xo, cache.x, dzo);
  matmul_tn_acc(grad.w_xc, cache.x, dzc);
  matmul_tn_acc(grad.w_hi, cache.h_prev, dzi);
  matmul_tn_acc(grad.w_hf, cache.h_prev, dzf);
  matmul_tn_acc(grad.w_ho, cache.h_prev, dzo);
  matmul_tn_acc(grad.w_hc, cache.h_prev, dzc);

  Matrix dx = matmul_nt(dzi, p.w_xi);
  matmul_nt_acc(dx, dzf, p.w_xf);
  matmul_nt_acc(dx, dzo, p.w_xo);
  matmul_nt_acc(dx, dzc, p.w_xc);

  dprev.h = matmul_nt(dzi, p.w_hi);
  matmul_nt_acc(dprev.h, dzf, p.w_hf);
  matmul_nt_acc(dprev.h, dzo, p.w_ho);
  matmul_nt_acc(dprev.h, dzc, p.w_hc);
  return dx;
}

// dh_local_in carries the gradient reaching this step's local state from the
// NEXT step's local recurrence; dh_global and dc_in likewise carry everything
// flowing back into h_global_t and c_t.
inline Matrix lsrc_step_backward(const LsrcParams& p, const LsrcCache& cache,
                                 const Matrix& dh_local_in, const Matrix& dh_global,
                                 const Matrix& dc_in, LsrcParams& grad,
                                 LsrcState& dprev) {
  Matrix dgo = ewise(dh_global, cache.c_tanh, Binary::hadamard);
  Matrix dc = ewise(ewise(dh_global, cache.gate_o, Binary::hadamard),
                    map(cache.c_tanh, Unary::dtanh), Binary::hadamard);
  add_inplace(dc, dc_in);

  Matrix dgi = ewise(dc, cache.cand, Binary::hadamard);
  Matrix dgf = ewise(dc, cache.c_prev, Binary::hadamard);
  Matrix dcand = ewise(dc, cache.gate_i, Binary::hadamard);
  dprev.c = ewise(dc, cache.gate_f, Binary::hadamard);

  Matrix dzi = ewise(dgi, map(cache.gate_i, Unary::dsigmoid), Binary::hadamard);
  Matrix dzf = ewise(dgf, map(cache.gate_f, Unary::dsigmoid), Binary::hadamard);
  Matrix dzo = ewise(dgo, map(cache.gate_o, Unary::dsigmoid), Binary::hadamard);
  Matrix dzc = ewise(dcand, map(cache.cand, Unary::dtanh), Binary::hadamard);

  matmul_tn_acc(grad.w_li, cache.h_local, dzi);
  matmul_tn_acc(grad.w_lf, cache.h_local, dzf);
  matmul_tn_acc(grad.w_lo, cache.h_local, dzo);
  matmul_tn_acc(grad.w_lc, cache.h_local, dzc);
  matmul_tn_acc(grad.w_gi, cache.h_global_prev, dzi);
  matmul_tn_acc(grad.w_gf, cache.h_global_prev, dzf);
  matmul_tn_acc(grad.w_go, cache.h_global_prev, dzo);
  matmul_tn_acc(grad.w_gc, cache.h_global_prev, dzc);

  // Total gradient at hl_t: future local recurrence plus the four gate paths.
  Matrix dh_local = matmul_nt(dzi, p.w_li);
  matmul_nt_acc(dh_local, dzf, p.w_lf);
  matmul_nt_acc(dh_local, dzo, p.w_lo);
  matmul_nt_acc(dh_local, dzc, p.w_lc);
  add_inplace(dh_local, dh_local_in);

  dprev.h_global = matmul_nt(dzi, p.w_gi);
  matmul_nt_acc(dprev.h_global, dzf, p.w_gf);
  matmul_nt_acc(dprev.h_global, dzo, p.w_go);
  matmul_nt_acc(dprev.h_global, dzc, p.w_gc);

  // Local recurrence: hl = tanh(x + hl_prev W_ll).
  Matrix dzl = ewise(dh_local, map(cache.h_local, Unary::dtanh), Binary::hadamard);
  matmul_tn_acc(grad.w_ll, cache.h_local_prev, dzl);
  dprev.h_local = matmul_nt(dzl, p.w_ll);
  return dzl;  // dx == dzl
}

}  // namespace lsrc
