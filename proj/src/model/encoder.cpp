#include "capsre/encoder.hpp"

#include <array>

#include "capsre/ops.hpp"

namespace capsre::encoder {

Embedded embed(const data::SentenceInstance& inst, const Var& word_table,
               std::span<const Var> position_tables, std::size_t max_len,
               std::int64_t unk) {
  const std::size_t m = position_tables.size();
  if (inst.position_ids.size() != max_len * m) {
    throw ContractViolation("embed: instance has " +
                            std::to_string(inst.position_ids.size()) +
                            " position ids, expected " +
                            std::to_string(max_len) + "x" + std::to_string(m));
  }
  const std::size_t n = std::min(inst.word_ids.size(), max_len);
  const auto vocab = static_cast<std::int64_t>(word_table.value().rows());

  Embedded out;
  out.mask.assign(max_len, 0);
  std::vector<std::int64_t> words(max_len, -1);
  for (std::size_t t = 0; t < n; ++t) {
    const std::int64_t id = inst.word_ids[t];
    words[t] = (id >= 0 && id < vocab) ? id : unk;
    out.mask[t] = 1;
  }
  std::vector<Var> columns;
  columns.reserve(m + 1);
  columns.push_back(ops::gather_rows(word_table, words));
  std::vector<std::int64_t> pos(max_len);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t t = 0; t < max_len; ++t) {
      pos[t] = t < n ? inst.position_ids[t * m + k] : -1;
    }
    columns.push_back(ops::gather_rows(position_tables[k], pos));
  }
  out.rows = ops::concat(columns, 1);
  return out;
}

Var lstm_direction(const Var& x, std::span<const char> mask,
                   const LstmWeights& w, bool reverse) {
  const std::size_t steps = x.value().rows();
  const std::size_t b = w.recurrent.value().rows();
  if (w.recurrent.value().cols() != 4 * b || w.input.value().cols() != 4 * b ||
      w.bias.value().size() != 4 * b) {
    throw ContractViolation("lstm: gate weights " + w.input.shape().str() + ", " +
                            w.recurrent.shape().str() + ", " + w.bias.shape().str() +
                            " inconsistent with hidden size " + std::to_string(b));
  }
  if (mask.size() != steps) {
    throw ContractViolation("lstm: mask length " + std::to_string(mask.size()) +
                            " vs " + std::to_string(steps) + " steps");
  }
  // Input projections for every step at once.
  const Var projected = ops::add_row(ops::matmul(x, w.input), w.bias);

  Var h(Tensor(Shape{1, b}));
  Var c(Tensor(Shape{1, b}));
  std::vector<Var> outputs(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    if (mask[t]) {
      const Var z = ops::add(ops::slice(projected, 0, t, t + 1),
                             ops::matmul(h, w.recurrent));
      const Var in_gate = ops::sigmoid(ops::slice(z, 1, 0, b));
      const Var forget = ops::sigmoid(ops::slice(z, 1, b, 2 * b));
      const Var cell = ops::tanh(ops::slice(z, 1, 2 * b, 3 * b));
      const Var out_gate = ops::sigmoid(ops::slice(z, 1, 3 * b, 4 * b));
      c = ops::add(ops::mul(forget, c), ops::mul(in_gate, cell));
      h = ops::mul(out_gate, ops::tanh(c));
    }
    outputs[t] = h;
  }
  return ops::concat(outputs, 0);
}

Var bilstm(const Var& x, std::span<const char> mask, const LstmWeights& fwd,
           const LstmWeights& bwd) {
  const std::array<Var, 2> halves{lstm_direction(x, mask, fwd, false),
                                  lstm_direction(x, mask, bwd, true)};
  return ops::concat(halves, 1);
}

Attended word_attention(const Var& hidden, const Var& bilinear, const Var& query,
                        std::span<const char> mask) {
  const std::size_t width = hidden.value().cols();
  if (bilinear.shape() != Shape{width, width} || query.value().size() != width) {
    throw ContractViolation("word_attention: A " + bilinear.shape().str() +
                            " and r " + query.shape().str() +
                            " must match hidden width " + std::to_string(width));
  }
  const Var r = ops::reshape(query, Shape{width, 1});
  const Var scores = ops::matmul(hidden, ops::matmul(bilinear, r));  // L x 1
  Attended out;
  out.weights = ops::softmax(scores, 0, mask);
  out.rows = ops::scale_rows(hidden, out.weights);
  return out;
}

}  // namespace capsre::encoder
