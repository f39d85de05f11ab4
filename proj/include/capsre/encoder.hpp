#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "capsre/autodiff.hpp"
#include "capsre/data.hpp"

namespace capsre::encoder {

/// Gate weights of one LSTM direction. Gates are laid out [input, forget,
/// cell, output] along the 4B axis.
struct LstmWeights {
  Var input;      // V x 4B
  Var recurrent;  // B x 4B
  Var bias;       // 4B
};

struct Embedded {
  Var rows;                 // L x V
  std::vector<char> mask;   // L entries, 1 = real token
};

/// Row t = [word(w_t), pos_1(p_t1), ..., pos_M(p_tM)] for t < length, zero
/// rows (masked) after. Word ids outside `word_table` fall back to `unk`.
Embedded embed(const data::SentenceInstance& inst, const Var& word_table,
               std::span<const Var> position_tables, std::size_t max_len,
               std::int64_t unk);

/// L x 2B, h_t = [forward h_t, backward h_t]. Masked steps carry the
/// previous state through unchanged.
Var bilstm(const Var& x, std::span<const char> mask, const LstmWeights& fwd,
           const LstmWeights& bwd);

/// One LSTM direction over `x`; returns L x B.
Var lstm_direction(const Var& x, std::span<const char> mask,
                   const LstmWeights& w, bool reverse);

struct Attended {
  Var rows;     // L x 2B, row t scaled by weight t
  Var weights;  // L x 1, zero at masked positions
};

/// g_t = h_t^T A r, weights = softmax over unmasked t, rows = weights_t h_t.
/// Raises ContractViolation when every position is masked.
Attended word_attention(const Var& hidden, const Var& bilinear, const Var& query,
                        std::span<const char> mask);

}  // namespace capsre::encoder
