#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metaood/diff/tape.hpp"

namespace metaood::diff {

// Binary elementwise ops accept equal shapes, or a 1x1 operand broadcast
// against the other. Everything else is a DimensionError.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);  // DomainError for any entry <= 0
Var sqrt(const Var& x);  // DomainError for any entry < 0
Var square(const Var& x);
Var reciprocal(const Var& x);  // DomainError for any zero entry
Var scale(const Var& x, double s);
Var add_scalar(const Var& x, double c);
Var clamp_min(const Var& x, double floor);  // zero gradient where clamped

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

/// Reduction direction: over_rows collapses rows (result 1 x cols), over_cols
/// collapses columns (result rows x 1), all yields 1x1.
enum class Axis { over_rows, over_cols, all };

Var sum(const Var& x, Axis axis = Axis::all);
Var mean(const Var& x, Axis axis = Axis::all);
Var logsumexp(const Var& x, Axis axis = Axis::all);
Var max(const Var& x, Axis axis = Axis::all);  // gradient routed to the first maximizer

Var transpose(const Var& x);
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
Var concat_rows(const std::vector<Var>& parts);
Var diagonal(const Var& square_matrix);  // n x 1
Var add_diagonal(const Var& square_matrix, const Var& scalar);  // S + c·I
Var broadcast_rows(const Var& row, std::size_t n);  // 1 x d -> n x d

/// Lower Cholesky factor of a symmetric positive definite matrix. Only the lower
/// triangle is read; the gradient is returned symmetrized.
Var cholesky(const Var& s);
/// Solves L·X = B for lower-triangular L with nonzero diagonal.
Var trisolve(const Var& l, const Var& b);
/// log det(L·Lᵀ) = 2·Σ log Lᵢᵢ.
Var logdet_from_cholesky(const Var& l);

}  // namespace metaood::diff
