#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fse/matrix.hpp"
#include "fse/serializer.hpp"

namespace fse {

// Reference implementations of the alignment, fusion, and likelihood math in
// double precision, with analytic gradients where training would need them.
// Everything is written as plain loops so results are easy to audit against
// independent oracles.

double cosine_sim(std::span<const double> a, std::span<const double> b);

// Row-wise softmax with row-max subtraction for overflow safety.
DenseMatrix softmax_rows(const DenseMatrix& scores);

struct AlignmentBatch {
  DenseMatrix x_global;  // B x d image features, one row per sample
  DenseMatrix t_global;  // B x d serialization features, same row order
  double tau1 = 0.07;    // temperature for the instance-level loss
  double tau2 = 0.07;    // temperature for the token-level loss
};

struct InstanceAlignmentResult {
  double loss_global = 0.0;            // 0.5 * (both directional losses)
  double loss_image_from_report = 0.0;  // per image row, softmax across reports
  double loss_report_from_image = 0.0;  // per report row, softmax across images
  DenseMatrix grad_x_global;  // d loss_global / d x_global
  DenseMatrix grad_t_global;  // d loss_global / d t_global
};

// Symmetric InfoNCE over pairwise cosine similarities of the global features.
// Matched pairs sit on the diagonal; each direction normalizes the scaled
// similarities across the batch. Throws std::domain_error for non-positive
// temperature, shape mismatch, or an all-zero feature row.
InstanceAlignmentResult instance_alignment_loss(const AlignmentBatch& batch);

// Single-head scaled dot-product attention softmax(Q K^T / sqrt(d)) V with
// d = Q.cols(). Throws std::domain_error when d == 0, K has no rows, or the
// shapes disagree (K.cols() == Q.cols(), V.rows() == K.rows()).
DenseMatrix cross_attention(const DenseMatrix& queries, const DenseMatrix& keys,
                            const DenseMatrix& values);

struct TokenAlignmentResult {
  double loss = 0.0;
  DenseMatrix grad_t_loc;  // d loss / d t_loc
  DenseMatrix grad_x_loc;  // d loss / d x_loc
};

// Token-level alignment for one sample: local text rows attend over local
// image rows (cross_attention), then a symmetric InfoNCE couples each text
// row with its attended counterpart across the sample's own positions.
// Gradients flow through both the similarity stage and the attention stage.
TokenAlignmentResult token_alignment_loss(const DenseMatrix& t_loc, const DenseMatrix& x_loc,
                                          double tau2);

struct TokenAlignmentInput {
  DenseMatrix t_loc;  // N_R x d local text features (unpadded)
  DenseMatrix x_loc;  // region-count x d local image features
};

// Pretraining objective: instance_alignment_loss(batch).loss_global plus the
// mean over samples of token_alignment_loss(...).loss, computed in exactly
// that order (global + local_sum / B).
double pretrain_loss(const AlignmentBatch& batch, std::span<const TokenAlignmentInput> locals);

struct CmfWeights {
  DenseMatrix w_qs, w_ks, w_vs;  // d x d projections, self-attention stage
  DenseMatrix w_qc, w_kc, w_vc;  // d x d projections, cross-attention stage
  DenseMatrix ffn_w1;            // d x d_ff
  std::vector<double> ffn_b1;    // d_ff
  DenseMatrix ffn_w2;            // d_ff x d
  std::vector<double> ffn_b2;    // d
  std::vector<double> ln1_gamma, ln1_beta;  // d
  std::vector<double> ln2_gamma, ln2_beta;  // d
  std::vector<double> ln3_gamma, ln3_beta;  // d
  double epsilon = 1e-5;

  // Zero projections and FFN, identity layer norms (gamma 1, beta 0).
  // d_ff == 0 selects the default expansion 4 * d.
  static CmfWeights zeros(std::size_t d, std::size_t d_ff = 0);
};

// Per-row layer norm: zero mean, unit variance (population, with epsilon),
// then elementwise gamma/beta.
DenseMatrix layer_norm(const DenseMatrix& input, std::span<const double> gamma,
                       std::span<const double> beta, double epsilon);

// Cross-modal fusion block:
//   X_s = LN1(X + ATTN(X Wqs, X Wks, X Wvs))
//   X_c = LN2(X_s + ATTN(X_s Wqc, T_e Wkc, T_e Wvc))
//   X_e = LN3(X_c + FFN(X_c)),  FFN = affine, ReLU, affine
// Output shape equals the input X shape for any evidence row count >= 1.
DenseMatrix cmf_forward(const DenseMatrix& x, const DenseMatrix& evidence, const CmfWeights& w);

struct CmfProbeResult {
  double value = 0.0;      // sum(probe . cmf_forward(x, evidence, w))
  DenseMatrix grad_x;         // d value / d x
  DenseMatrix grad_evidence;  // d value / d evidence
};

// Scalar probe of the fusion block (a fixed linear functional of the output)
// with analytic gradients for both inputs; this is the surface the
// finite-difference checker exercises.
CmfProbeResult cmf_probe(const DenseMatrix& x, const DenseMatrix& evidence, const CmfWeights& w,
                         const DenseMatrix& probe);

struct NllSample {
  DenseMatrix logprobs;              // M steps x V log-probability rows
  std::vector<std::size_t> targets;  // M target token ids
  std::vector<std::uint8_t> mask;    // M step validity flags (0 or 1)
};

using NllBatch = std::vector<NllSample>;

// Masked negative log-likelihood: -(1/B) sum over samples and steps of
// mask * logprobs[step][target]. Throws std::out_of_range when a target id
// falls outside a sample's vocabulary width.
double nll_loss(const NllBatch& batch);

// d nll_loss / d logprobs, one matrix per sample.
std::vector<DenseMatrix> nll_gradients(const NllBatch& batch);

// Largest |logsumexp(row)| across the batch; valid log-probability rows keep
// this near zero.
double nll_max_logsumexp_deviation(const NllBatch& batch);

// Per-token embedding lookup standing in for a frozen text encoder.
using TokenEmbedder = std::function<std::vector<double>(const std::string&)>;

// Stacks the embedded tokens of each case's rendered serialization into one
// block per case (case order preserved), prepends a global row equal to the
// mean of all token rows, and returns the (N_ke + 1) x dim result. case_count
// must equal cases.size(); at least one token is required overall.
DenseMatrix evidence_features(const std::vector<FactualSerialization>& cases,
                              const TokenEmbedder& embed, std::size_t dim,
                              std::size_t case_count);

}  // namespace fse
