#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "capsre/autodiff.hpp"
#include "capsre/rng.hpp"

// Differentiable operations. Each op computes its output eagerly and, when
// any input is tracked, records a backward rule on that input's tape.
// Matrices are rank-2; a rank-1 vector is accepted wherever a 1 x n row is.

namespace capsre::ops {

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

/// a[r, :] + bias for every row r; bias has `cols(a)` entries.
Var add_row(const Var& a, const Var& bias);
/// a[r, :] * scale[r]; scale has `rows(a)` entries.
Var scale_rows(const Var& a, const Var& scale);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// Concatenate along `axis` (0 = rows, 1 = cols) of rank-2 operands.
Var concat(std::span<const Var> parts, std::size_t axis);
/// Half-open range [begin, end) along `axis` of a rank-2 operand.
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(const Var& a, Shape shape);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var square(const Var& a);

Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double value);

/// Sum of all entries, rank-0 result.
Var sum(const Var& a);
Var mean(const Var& a);

/// Softmax of a rank-2 operand along `axis`. Entries with mask == false get
/// probability exactly 0; each normalized slice must keep one unmasked entry.
/// The mask, when given, has the operand's total size.
Var softmax(const Var& a, std::size_t axis,
            std::optional<std::span<const char>> mask = std::nullopt);

/// Euclidean norm over all entries, rank-0 result.
Var l2_norm(const Var& a);
/// Euclidean norm of every row: R x C -> R.
Var row_norms(const Var& a);
/// squash(x) = |x|^2 / (0.5 + |x|^2) * x / |x| applied to every row;
/// the zero row maps to zero.
Var squash_rows(const Var& a);

/// Inverted dropout: in training each entry survives with probability
/// `keep` and is scaled by 1/keep; outside training the input is returned.
Var dropout(const Var& a, double keep, bool training, Rng& rng);

/// Rows of `table` selected by `ids`; id < 0 produces a zero row.
Var gather_rows(const Var& table, std::span<const std::int64_t> ids);

/// Capsule votes: out[i, j, :] = W[j] u[i] + bias[j].
/// u H x d, W E x d x d, bias E x d -> H x E x d.
Var capsule_votes(const Var& u, const Var& weights, const Var& bias);
/// out[j, :] = sum_i coupling[i, j] votes[i, j, :]  (H x E, H x E x d -> E x d)
Var route_aggregate(const Var& coupling, const Var& votes);
/// out[i, j] = <votes[i, j, :], parents[j, :]>  (H x E x d, E x d -> H x E)
Var route_agreement(const Var& votes, const Var& parents);

}  // namespace capsre::ops
