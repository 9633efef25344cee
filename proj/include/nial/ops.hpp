#pragma once

#include <vector>

#include "nial/rng.hpp"
#include "nial/tensor.hpp"

namespace nial {

// Differentiable primitives over Tensor. Every op computes its forward result
// eagerly and, when a GradTape is active and any input requires grad, records
// a backward closure onto it. Shape violations throw DimensionError naming
// both shapes.

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor mul(const Tensor& a, const Tensor& b);          // same shape, Hadamard
Tensor scale(const Tensor& x, double c);

// b broadcasts over the leading dims of a; b.shape must be a suffix of a.shape
// (bias add, positional encoding add).
Tensor add_bcast(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// ---- shape ------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape);
Tensor transpose(const Tensor& x, Index axis0, Index axis1);

// ---- contractions -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);       // [MxK]·[KxN]
Tensor bmm(const Tensor& a, const Tensor& b);          // [...xMxK]·[...xKxN], equal leading dims

// y = x·w + b over the last dim of x; w is [InxOut], b is [Out].
// Composition of reshape/matmul/add_bcast, provided for convenience.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x);                           // scalar [1]
Tensor mean_axis(const Tensor& x, Index axis);         // removes `axis`

// ---- neural-net primitives --------------------------------------------------

// Cross-correlation (no kernel flip): x [BxCinxL], w [CoutxCinxK], bias [Cout].
// Lout = floor((L + 2*padding - K)/stride) + 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Index stride, Index padding);

// Lout = floor((L - window)/stride) + 1; gradient routes to the first maximum
// of each window.
Tensor maxpool1d(const Tensor& x, Index window, Index stride);

// Max-subtracted softmax along `axis`; each slice sums to 1.
Tensor softmax(const Tensor& x, Index axis);

// Per-slice zero mean / unit variance over the last dim (population variance,
// eps inside the square root), then the affine gamma/beta.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-5);

// Inverted dropout: keep with probability 1-p and scale by 1/(1-p). Identity
// when training is false or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// ---- losses (fused final nonlinearity, mean over the batch) -----------------

// -log softmax(logits)[label], averaged; logits [BxK], labels in [0,K).
Tensor categorical_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Stable logit-form BCE; logits [Bx1] or [B], labels in {0,1}.
Tensor binary_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace nial
