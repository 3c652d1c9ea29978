#include "fse/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fse {

namespace {

void require(bool condition, const char* message) {
  if (!condition) throw std::domain_error(message);
}

std::vector<double> row_norms(const DenseMatrix& m, const char* who) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    norms[i] = l2_norm(m.row(i));
    if (norms[i] == 0.0) throw std::domain_error(std::string(who) + ": all-zero feature row");
  }
  return norms;
}

// Cosine similarity matrix between the rows of a and the rows of b, given
// precomputed row norms.
DenseMatrix cosine_matrix(const DenseMatrix& a, const DenseMatrix& b,
                          const std::vector<double>& norms_a, const std::vector<double>& norms_b) {
  DenseMatrix s(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      s(i, j) = dot(a.row(i), b.row(j)) / (norms_a[i] * norms_b[j]);
    }
  }
  return s;
}

// Shared core of the symmetric InfoNCE stages: given a square similarity
// matrix whose diagonal holds the matched pairs, accumulates both directional
// cross-entropy sums (softmax across each row, and across each column) and
// the combined gradient d(sum_row + sum_col)/dS. The caller applies its own
// normalization constants.
struct ContrastiveSums {
  double row_direction = 0.0;  // sum_i of -(S_ii/tau - lse_j S_ij/tau)
  double col_direction = 0.0;  // sum_i of -(S_ii/tau - lse_j S_ji/tau)
  DenseMatrix grad;            // d(row_direction + col_direction)/dS
};

ContrastiveSums contrastive_sums(const DenseMatrix& s, double tau) {
  const std::size_t n = s.rows();
  DenseMatrix p_row(n, n);
  DenseMatrix p_col(n, n);
  ContrastiveSums out;
  out.grad = DenseMatrix(n, n);

  for (std::size_t i = 0; i < n; ++i) {
    double max_logit = s(i, 0) / tau;
    for (std::size_t j = 1; j < n; ++j) max_logit = std::max(max_logit, s(i, j) / tau);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(s(i, j) / tau - max_logit);
    const double lse = max_logit + std::log(total);
    out.row_direction -= s(i, i) / tau - lse;
    for (std::size_t j = 0; j < n; ++j) p_row(i, j) = std::exp(s(i, j) / tau - lse);
  }

  for (std::size_t i = 0; i < n; ++i) {
    double max_logit = s(0, i) / tau;
    for (std::size_t j = 1; j < n; ++j) max_logit = std::max(max_logit, s(j, i) / tau);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(s(j, i) / tau - max_logit);
    const double lse = max_logit + std::log(total);
    out.col_direction -= s(i, i) / tau - lse;
    for (std::size_t j = 0; j < n; ++j) p_col(j, i) = std::exp(s(j, i) / tau - lse);
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = i == j ? 2.0 : 0.0;
      out.grad(i, j) = (p_row(i, j) + p_col(i, j) - delta) / tau;
    }
  }
  return out;
}

// Accumulates grad_a/grad_b contributions of d cos(a_i, b_j) given the
// upstream weight g at (i, j).
void accumulate_cosine_grads(const DenseMatrix& a, const DenseMatrix& b,
                             const std::vector<double>& norms_a,
                             const std::vector<double>& norms_b, const DenseMatrix& s,
                             const DenseMatrix& upstream, DenseMatrix& grad_a,
                             DenseMatrix& grad_b) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double g = upstream(i, j);
      if (g == 0.0) continue;
      const double inv = 1.0 / (norms_a[i] * norms_b[j]);
      for (std::size_t c = 0; c < a.cols(); ++c) {
        grad_a(i, c) += g * (b(j, c) * inv - s(i, j) * a(i, c) / (norms_a[i] * norms_a[i]));
        grad_b(j, c) += g * (a(i, c) * inv - s(i, j) * b(j, c) / (norms_b[j] * norms_b[j]));
      }
    }
  }
}

// Row softmax backward: dA = (dP - rowwise_dot(dP, P)) * P.
DenseMatrix softmax_rows_backward(const DenseMatrix& dp, const DenseMatrix& p) {
  DenseMatrix da(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) inner += dp(i, j) * p(i, j);
    for (std::size_t j = 0; j < p.cols(); ++j) da(i, j) = (dp(i, j) - inner) * p(i, j);
  }
  return da;
}

void layer_norm_row(std::span<const double> x, std::span<const double> gamma,
                    std::span<const double> beta, double epsilon, std::span<double> out) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double variance = 0.0;
  for (double v : x) variance += (v - mean) * (v - mean);
  variance /= static_cast<double>(d);
  const double scale = 1.0 / std::sqrt(variance + epsilon);
  for (std::size_t c = 0; c < d; ++c) out[c] = gamma[c] * (x[c] - mean) * scale + beta[c];
}

// Layer norm backward for one row, recomputing the normalization statistics
// from the cached pre-norm input.
void layer_norm_row_backward(std::span<const double> x, std::span<const double> gamma,
                             double epsilon, std::span<const double> dy, std::span<double> dx) {
  const std::size_t d = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double variance = 0.0;
  for (double v : x) variance += (v - mean) * (v - mean);
  variance /= static_cast<double>(d);
  const double scale = 1.0 / std::sqrt(variance + epsilon);

  double mean_dxhat = 0.0;
  double mean_dxhat_xhat = 0.0;
  std::vector<double> xhat(d), dxhat(d);
  for (std::size_t c = 0; c < d; ++c) {
    xhat[c] = (x[c] - mean) * scale;
    dxhat[c] = dy[c] * gamma[c];
    mean_dxhat += dxhat[c];
    mean_dxhat_xhat += dxhat[c] * xhat[c];
  }
  mean_dxhat /= static_cast<double>(d);
  mean_dxhat_xhat /= static_cast<double>(d);
  for (std::size_t c = 0; c < d; ++c) {
    dx[c] = scale * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
  }
}

void check_vector_size(const std::vector<double>& v, std::size_t expected, const char* name) {
  if (v.size() != expected) {
    throw std::domain_error(std::string("cmf: ") + name + " has wrong length");
  }
}

void check_cmf_shapes(const DenseMatrix& x, const DenseMatrix& evidence, const CmfWeights& w) {
  const std::size_t d = x.cols();
  require(x.rows() >= 1 && d >= 1, "cmf: x must be non-empty");
  require(evidence.rows() >= 1, "cmf: evidence must have at least one row");
  require(evidence.cols() == d, "cmf: evidence feature width differs from x");
  for (const DenseMatrix* m : {&w.w_qs, &w.w_ks, &w.w_vs, &w.w_qc, &w.w_kc, &w.w_vc}) {
    require(m->rows() == d && m->cols() == d, "cmf: projection weight must be d x d");
  }
  const std::size_t d_ff = w.ffn_w1.cols();
  require(w.ffn_w1.rows() == d && d_ff >= 1, "cmf: ffn_w1 must be d x d_ff");
  require(w.ffn_w2.rows() == d_ff && w.ffn_w2.cols() == d, "cmf: ffn_w2 must be d_ff x d");
  check_vector_size(w.ffn_b1, d_ff, "ffn_b1");
  check_vector_size(w.ffn_b2, d, "ffn_b2");
  check_vector_size(w.ln1_gamma, d, "ln1_gamma");
  check_vector_size(w.ln1_beta, d, "ln1_beta");
  check_vector_size(w.ln2_gamma, d, "ln2_gamma");
  check_vector_size(w.ln2_beta, d, "ln2_beta");
  check_vector_size(w.ln3_gamma, d, "ln3_gamma");
  check_vector_size(w.ln3_beta, d, "ln3_beta");
  require(w.epsilon > 0.0, "cmf: epsilon must be positive");
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

DenseMatrix affine(const DenseMatrix& x, const DenseMatrix& w, const std::vector<double>& b) {
  DenseMatrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
  }
  return out;
}

// Every intermediate of the fusion block, kept for the backward pass.
struct CmfCache {
  DenseMatrix qs, ks, vs, ps, r1, xs;      // self-attention stage
  DenseMatrix qc, kc, vc, pc, r2, xc;      // cross-attention stage
  DenseMatrix h1, hr, r3, xe;              // feed-forward stage
};

DenseMatrix scaled_scores(const DenseMatrix& q, const DenseMatrix& k) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  DenseMatrix scores = matmul(q, transposed(k));
  for (double& v : scores.values()) v *= scale;
  return scores;
}

CmfCache cmf_forward_cached(const DenseMatrix& x, const DenseMatrix& evidence,
                            const CmfWeights& w) {
  check_cmf_shapes(x, evidence, w);
  CmfCache c;

  c.qs = matmul(x, w.w_qs);
  c.ks = matmul(x, w.w_ks);
  c.vs = matmul(x, w.w_vs);
  c.ps = softmax_rows(scaled_scores(c.qs, c.ks));
  c.r1 = add(x, matmul(c.ps, c.vs));
  c.xs = layer_norm(c.r1, w.ln1_gamma, w.ln1_beta, w.epsilon);

  c.qc = matmul(c.xs, w.w_qc);
  c.kc = matmul(evidence, w.w_kc);
  c.vc = matmul(evidence, w.w_vc);
  c.pc = softmax_rows(scaled_scores(c.qc, c.kc));
  c.r2 = add(c.xs, matmul(c.pc, c.vc));
  c.xc = layer_norm(c.r2, w.ln2_gamma, w.ln2_beta, w.epsilon);

  c.h1 = affine(c.xc, w.ffn_w1, w.ffn_b1);
  c.hr = c.h1;
  for (double& v : c.hr.values()) v = std::max(0.0, v);
  c.r3 = add(c.xc, affine(c.hr, w.ffn_w2, w.ffn_b2));
  c.xe = layer_norm(c.r3, w.ln3_gamma, w.ln3_beta, w.epsilon);
  return c;
}

DenseMatrix layer_norm_backward(const DenseMatrix& pre_norm, std::span<const double> gamma,
                                double epsilon, const DenseMatrix& dy) {
  DenseMatrix dx(pre_norm.rows(), pre_norm.cols());
  for (std::size_t i = 0; i < pre_norm.rows(); ++i) {
    layer_norm_row_backward(pre_norm.row(i), gamma, epsilon, dy.row(i), dx.row(i));
  }
  return dx;
}

// Backward through softmax(Q K^T / sqrt(d)) V given cached P and the inputs.
struct AttentionGrads {
  DenseMatrix dq, dk, dv;
};

AttentionGrads attention_backward(const DenseMatrix& q, const DenseMatrix& k,
                                  const DenseMatrix& v, const DenseMatrix& p,
                                  const DenseMatrix& d_out) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  AttentionGrads g;
  g.dv = matmul(transposed(p), d_out);
  const DenseMatrix dp = matmul(d_out, transposed(v));
  DenseMatrix da = softmax_rows_backward(dp, p);
  for (double& value : da.values()) value *= scale;
  g.dq = matmul(da, k);
  g.dk = matmul(transposed(da), q);
  return g;
}

}  // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::domain_error("cosine_sim: dimension mismatch");
  if (a.empty()) throw std::domain_error("cosine_sim: empty vectors");
  const double norm_a = l2_norm(a);
  const double norm_b = l2_norm(b);
  if (norm_a == 0.0 || norm_b == 0.0) throw std::domain_error("cosine_sim: zero vector");
  return dot(a, b) / (norm_a * norm_b);
}

DenseMatrix softmax_rows(const DenseMatrix& scores) {
  require(scores.cols() >= 1, "softmax_rows: empty rows");
  DenseMatrix p(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    double max_score = scores(i, 0);
    for (std::size_t j = 1; j < scores.cols(); ++j) max_score = std::max(max_score, scores(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < scores.cols(); ++j) {
      p(i, j) = std::exp(scores(i, j) - max_score);
      total += p(i, j);
    }
    for (std::size_t j = 0; j < scores.cols(); ++j) p(i, j) /= total;
  }
  return p;
}

InstanceAlignmentResult instance_alignment_loss(const AlignmentBatch& batch) {
  const DenseMatrix& x = batch.x_global;
  const DenseMatrix& t = batch.t_global;
  require(batch.tau1 > 0.0, "instance_alignment_loss: tau1 must be positive");
  require(x.rows() >= 1, "instance_alignment_loss: empty batch");
  require(x.rows() == t.rows(), "instance_alignment_loss: batch sizes differ");
  require(x.cols() == t.cols() && x.cols() >= 1, "instance_alignment_loss: feature widths differ");
  require(x.all_finite() && t.all_finite(), "instance_alignment_loss: non-finite input");

  const std::size_t batch_size = x.rows();
  const auto norms_x = row_norms(x, "instance_alignment_loss");
  const auto norms_t = row_norms(t, "instance_alignment_loss");
  const DenseMatrix s = cosine_matrix(x, t, norms_x, norms_t);

  const ContrastiveSums sums = contrastive_sums(s, batch.tau1);
  const double inv_b = 1.0 / static_cast<double>(batch_size);

  InstanceAlignmentResult result;
  result.loss_image_from_report = sums.row_direction * inv_b;
  result.loss_report_from_image = sums.col_direction * inv_b;
  result.loss_global = 0.5 * (result.loss_image_from_report + result.loss_report_from_image);

  // d loss_global / dS = 0.5 / B * (combined directional gradient).
  DenseMatrix upstream = sums.grad;
  for (double& v : upstream.values()) v *= 0.5 * inv_b;
  result.grad_x_global = DenseMatrix(x.rows(), x.cols());
  result.grad_t_global = DenseMatrix(t.rows(), t.cols());
  accumulate_cosine_grads(x, t, norms_x, norms_t, s, upstream, result.grad_x_global,
                          result.grad_t_global);
  return result;
}

DenseMatrix cross_attention(const DenseMatrix& queries, const DenseMatrix& keys,
                            const DenseMatrix& values) {
  require(queries.cols() >= 1, "cross_attention: zero feature dimension");
  require(keys.rows() >= 1, "cross_attention: no key rows");
  require(keys.cols() == queries.cols(), "cross_attention: key width differs from query width");
  require(values.rows() == keys.rows(), "cross_attention: value rows differ from key rows");
  return matmul(softmax_rows(scaled_scores(queries, keys)), values);
}

TokenAlignmentResult token_alignment_loss(const DenseMatrix& t_loc, const DenseMatrix& x_loc,
                                          double tau2) {
  require(tau2 > 0.0, "token_alignment_loss: tau2 must be positive");
  require(t_loc.rows() >= 1, "token_alignment_loss: no text tokens");
  require(x_loc.rows() >= 1, "token_alignment_loss: no image regions");
  require(t_loc.cols() == x_loc.cols() && t_loc.cols() >= 1,
          "token_alignment_loss: feature widths differ");
  require(t_loc.all_finite() && x_loc.all_finite(), "token_alignment_loss: non-finite input");

  const std::size_t n = t_loc.rows();

  // Forward: attended text rows, then the within-sample similarity matrix.
  const DenseMatrix p = softmax_rows(scaled_scores(t_loc, x_loc));
  const DenseMatrix attended = matmul(p, x_loc);  // one row per text token

  const auto norms_t = row_norms(t_loc, "token_alignment_loss");
  const auto norms_a = row_norms(attended, "token_alignment_loss");
  const DenseMatrix m = cosine_matrix(t_loc, attended, norms_t, norms_a);

  const ContrastiveSums sums = contrastive_sums(m, tau2);
  const double inv = 1.0 / (2.0 * static_cast<double>(n));

  TokenAlignmentResult result;
  result.loss = (sums.row_direction + sums.col_direction) * inv;

  DenseMatrix upstream = sums.grad;
  for (double& v : upstream.values()) v *= inv;

  // Similarity stage: direct gradient into t_loc, plus gradient into the
  // attended rows.
  result.grad_t_loc = DenseMatrix(t_loc.rows(), t_loc.cols());
  DenseMatrix grad_attended(attended.rows(), attended.cols());
  accumulate_cosine_grads(t_loc, attended, norms_t, norms_a, m, upstream, result.grad_t_loc,
                          grad_attended);

  // Attention stage: attended = softmax(t x^T / sqrt(d)) x, so x_loc collects
  // both the value path and the key path while t_loc collects the query path.
  const AttentionGrads attn = attention_backward(t_loc, x_loc, x_loc, p, grad_attended);
  result.grad_x_loc = add(attn.dv, attn.dk);
  result.grad_t_loc = add(result.grad_t_loc, attn.dq);
  return result;
}

double pretrain_loss(const AlignmentBatch& batch, std::span<const TokenAlignmentInput> locals) {
  require(locals.size() == batch.x_global.rows(),
          "pretrain_loss: per-sample local inputs must match the batch size");
  double local_sum = 0.0;
  for (const TokenAlignmentInput& sample : locals) {
    local_sum += token_alignment_loss(sample.t_loc, sample.x_loc, batch.tau2).loss;
  }
  return instance_alignment_loss(batch).loss_global +
         local_sum / static_cast<double>(locals.size());
}

CmfWeights CmfWeights::zeros(std::size_t d, std::size_t d_ff) {
  if (d_ff == 0) d_ff = 4 * d;
  CmfWeights w;
  w.w_qs = w.w_ks = w.w_vs = DenseMatrix(d, d);
  w.w_qc = w.w_kc = w.w_vc = DenseMatrix(d, d);
  w.ffn_w1 = DenseMatrix(d, d_ff);
  w.ffn_b1.assign(d_ff, 0.0);
  w.ffn_w2 = DenseMatrix(d_ff, d);
  w.ffn_b2.assign(d, 0.0);
  w.ln1_gamma.assign(d, 1.0);
  w.ln1_beta.assign(d, 0.0);
  w.ln2_gamma.assign(d, 1.0);
  w.ln2_beta.assign(d, 0.0);
  w.ln3_gamma.assign(d, 1.0);
  w.ln3_beta.assign(d, 0.0);
  return w;
}

DenseMatrix layer_norm(const DenseMatrix& input, std::span<const double> gamma,
                       std::span<const double> beta, double epsilon) {
  require(gamma.size() == input.cols() && beta.size() == input.cols(),
          "layer_norm: gamma/beta length differs from feature width");
  require(epsilon > 0.0, "layer_norm: epsilon must be positive");
  DenseMatrix out(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.rows(); ++i) {
    layer_norm_row(input.row(i), gamma, beta, epsilon, out.row(i));
  }
  return out;
}

DenseMatrix cmf_forward(const DenseMatrix& x, const DenseMatrix& evidence, const CmfWeights& w) {
  return cmf_forward_cached(x, evidence, w).xe;
}

CmfProbeResult cmf_probe(const DenseMatrix& x, const DenseMatrix& evidence, const CmfWeights& w,
                         const DenseMatrix& probe) {
  const CmfCache c = cmf_forward_cached(x, evidence, w);
  require(probe.rows() == c.xe.rows() && probe.cols() == c.xe.cols(),
          "cmf_probe: probe shape differs from the output");

  CmfProbeResult result;
  result.value = dot(probe.values(), c.xe.values());

  // Feed-forward stage.
  const DenseMatrix dr3 = layer_norm_backward(c.r3, w.ln3_gamma, w.epsilon, probe);
  DenseMatrix dxc = dr3;
  DenseMatrix dhr = matmul(dr3, transposed(w.ffn_w2));
  for (std::size_t i = 0; i < dhr.values().size(); ++i) {
    if (c.h1.values()[i] <= 0.0) dhr.values()[i] = 0.0;  // ReLU gate
  }
  dxc = add(dxc, matmul(dhr, transposed(w.ffn_w1)));

  // Cross-attention stage.
  const DenseMatrix dr2 = layer_norm_backward(c.r2, w.ln2_gamma, w.epsilon, dxc);
  DenseMatrix dxs = dr2;
  const AttentionGrads cross = attention_backward(c.qc, c.kc, c.vc, c.pc, dr2);
  dxs = add(dxs, matmul(cross.dq, transposed(w.w_qc)));
  result.grad_evidence = add(matmul(cross.dk, transposed(w.w_kc)),
                             matmul(cross.dv, transposed(w.w_vc)));

  // Self-attention stage.
  const DenseMatrix dr1 = layer_norm_backward(c.r1, w.ln1_gamma, w.epsilon, dxs);
  DenseMatrix dx = dr1;
  const AttentionGrads self = attention_backward(c.qs, c.ks, c.vs, c.ps, dr1);
  dx = add(dx, matmul(self.dq, transposed(w.w_qs)));
  dx = add(dx, matmul(self.dk, transposed(w.w_ks)));
  dx = add(dx, matmul(self.dv, transposed(w.w_vs)));
  result.grad_x = std::move(dx);
  return result;
}

double nll_loss(const NllBatch& batch) {
  require(!batch.empty(), "nll_loss: empty batch");
  double total = 0.0;
  for (const NllSample& sample : batch) {
    const std::size_t steps = sample.logprobs.rows();
    require(sample.targets.size() == steps && sample.mask.size() == steps,
            "nll_loss: targets/mask length differs from the step count");
    for (std::size_t t = 0; t < steps; ++t) {
      if (sample.targets[t] >= sample.logprobs.cols()) {
        throw std::out_of_range("nll_loss: target id " + std::to_string(sample.targets[t]) +
                                " outside vocabulary of " +
                                std::to_string(sample.logprobs.cols()));
      }
      if (sample.mask[t]) total += sample.logprobs(t, sample.targets[t]);
    }
  }
  return -total / static_cast<double>(batch.size());
}

std::vector<DenseMatrix> nll_gradients(const NllBatch& batch) {
  require(!batch.empty(), "nll_gradients: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<DenseMatrix> grads;
  grads.reserve(batch.size());
  for (const NllSample& sample : batch) {
    DenseMatrix grad(sample.logprobs.rows(), sample.logprobs.cols());
    for (std::size_t t = 0; t < sample.logprobs.rows(); ++t) {
      if (sample.mask[t]) grad(t, sample.targets[t]) = -inv_b;
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

double nll_max_logsumexp_deviation(const NllBatch& batch) {
  double worst = 0.0;
  for (const NllSample& sample : batch) {
    for (std::size_t t = 0; t < sample.logprobs.rows(); ++t) {
      double max_lp = sample.logprobs(t, 0);
      for (std::size_t v = 1; v < sample.logprobs.cols(); ++v) {
        max_lp = std::max(max_lp, sample.logprobs(t, v));
      }
      double total = 0.0;
      for (std::size_t v = 0; v < sample.logprobs.cols(); ++v) {
        total += std::exp(sample.logprobs(t, v) - max_lp);
      }
      worst = std::max(worst, std::abs(max_lp + std::log(total)));
    }
  }
  return worst;
}

DenseMatrix evidence_features(const std::vector<FactualSerialization>& cases,
                              const TokenEmbedder& embed, std::size_t dim,
                              std::size_t case_count) {
  require(!cases.empty(), "evidence_features: empty case list");
  require(case_count == cases.size(),
          "evidence_features: case_count differs from the number of cases");
  require(dim >= 1, "evidence_features: dim must be >= 1");

  std::vector<std::vector<double>> token_rows;
  for (const FactualSerialization& item : cases) {
    for (const std::string& token : split_whitespace(item.rendered)) {
      std::vector<double> row = embed(token);
      if (row.size() != dim) {
        throw std::domain_error("evidence_features: embedding width differs from dim for \"" +
                                token + "\"");
      }
      token_rows.push_back(std::move(row));
    }
  }
  require(!token_rows.empty(), "evidence_features: cases contain no tokens");

  DenseMatrix out(token_rows.size() + 1, dim);
  for (std::size_t r = 0; r < token_rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      out(r + 1, c) = token_rows[r][c];
      out(0, c) += token_rows[r][c];
    }
  }
  for (std::size_t c = 0; c < dim; ++c) {
    out(0, c) /= static_cast<double>(token_rows.size());  // global row = token mean
  }
  return out;
}

}  // namespace fse
