#include "fse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace fse {

namespace {

void check_eps(double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-3)) {
    throw std::domain_error("grad_check: eps must lie in [1e-8, 1e-3]");
  }
}

// Central-difference sweep over one coordinate vector. `evaluate` recomputes
// the scalar after each perturbation of `coords`.
template <typename F>
double sweep(std::span<double> coords, std::span<const double> analytic, double eps,
             F&& evaluate) {
  double worst = 0.0;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const double saved = coords[c];
    coords[c] = saved + eps;
    const double plus = evaluate();
    coords[c] = saved - eps;
    const double minus = evaluate();
    coords[c] = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double rel = std::abs(analytic[c] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

void fill_normal(DenseMatrix& m, Rng& rng, double scale = 1.0) {
  for (double& v : m.values()) v = rng.normal() * scale;
}

}  // namespace

double grad_check_instance_loss(const AlignmentBatch& point, double eps) {
  check_eps(eps);
  const InstanceAlignmentResult at_center = instance_alignment_loss(point);

  AlignmentBatch probe = point;
  const auto evaluate = [&probe] { return instance_alignment_loss(probe).loss_global; };
  const double worst_x =
      sweep(probe.x_global.values(), at_center.grad_x_global.values(), eps, evaluate);
  const double worst_t =
      sweep(probe.t_global.values(), at_center.grad_t_global.values(), eps, evaluate);
  return std::max(worst_x, worst_t);
}

double grad_check_token_loss(const DenseMatrix& t_loc, const DenseMatrix& x_loc, double tau2,
                             double eps) {
  check_eps(eps);
  const TokenAlignmentResult at_center = token_alignment_loss(t_loc, x_loc, tau2);

  DenseMatrix t_probe = t_loc;
  DenseMatrix x_probe = x_loc;
  const auto evaluate = [&] { return token_alignment_loss(t_probe, x_probe, tau2).loss; };
  const double worst_t = sweep(t_probe.values(), at_center.grad_t_loc.values(), eps, evaluate);
  const double worst_x = sweep(x_probe.values(), at_center.grad_x_loc.values(), eps, evaluate);
  return std::max(worst_t, worst_x);
}

double grad_check_cmf_probe(const DenseMatrix& x, const DenseMatrix& evidence,
                            const CmfWeights& weights, const DenseMatrix& probe, double eps) {
  check_eps(eps);
  const CmfProbeResult at_center = cmf_probe(x, evidence, weights, probe);

  DenseMatrix x_probe = x;
  DenseMatrix evidence_probe = evidence;
  const auto evaluate = [&] {
    return dot(probe.values(), cmf_forward(x_probe, evidence_probe, weights).values());
  };
  const double worst_x = sweep(x_probe.values(), at_center.grad_x.values(), eps, evaluate);
  const double worst_e =
      sweep(evidence_probe.values(), at_center.grad_evidence.values(), eps, evaluate);
  return std::max(worst_x, worst_e);
}

double grad_check_nll(const NllBatch& batch, double eps) {
  check_eps(eps);
  const std::vector<DenseMatrix> analytic = nll_gradients(batch);

  NllBatch probe = batch;
  const auto evaluate = [&probe] { return nll_loss(probe); };
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    worst = std::max(worst,
                     sweep(probe[i].logprobs.values(), analytic[i].values(), eps, evaluate));
  }
  return worst;
}

AlignmentBatch make_random_alignment_batch(std::uint64_t seed, double tau1, double tau2) {
  Rng rng(seed);
  const std::size_t batch_size = 2 + rng.below(4);
  const std::size_t dim = 3 + rng.below(6);
  AlignmentBatch batch;
  batch.tau1 = tau1;
  batch.tau2 = tau2;
  batch.x_global = DenseMatrix(batch_size, dim);
  batch.t_global = DenseMatrix(batch_size, dim);
  fill_normal(batch.x_global, rng);
  fill_normal(batch.t_global, rng);
  return batch;
}

TokenAlignmentInput make_random_token_point(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t tokens = 2 + rng.below(5);
  const std::size_t regions = 4 + rng.below(9);
  const std::size_t dim = 3 + rng.below(6);
  TokenAlignmentInput point;
  point.t_loc = DenseMatrix(tokens, dim);
  point.x_loc = DenseMatrix(regions, dim);
  fill_normal(point.t_loc, rng);
  fill_normal(point.x_loc, rng);
  return point;
}

CmfWeights make_random_cmf_weights(Rng& rng, std::size_t d, std::size_t d_ff) {
  CmfWeights w = CmfWeights::zeros(d, d_ff);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (DenseMatrix* m : {&w.w_qs, &w.w_ks, &w.w_vs, &w.w_qc, &w.w_kc, &w.w_vc, &w.ffn_w1,
                         &w.ffn_w2}) {
    fill_normal(*m, rng, scale);
  }
  for (double& v : w.ffn_b1) v = rng.normal() * 0.1;
  for (double& v : w.ffn_b2) v = rng.normal() * 0.1;
  for (double& v : w.ln1_gamma) v = 0.5 + rng.uniform();
  for (double& v : w.ln2_gamma) v = 0.5 + rng.uniform();
  for (double& v : w.ln3_gamma) v = 0.5 + rng.uniform();
  for (double& v : w.ln1_beta) v = rng.normal() * 0.1;
  for (double& v : w.ln2_beta) v = rng.normal() * 0.1;
  for (double& v : w.ln3_beta) v = rng.normal() * 0.1;
  return w;
}

NllBatch make_random_nll_batch(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t batch_size = 1 + rng.below(3);
  const std::size_t steps = 1 + rng.below(4);
  const std::size_t vocab = 2 + rng.below(5);

  NllBatch batch;
  for (std::size_t i = 0; i < batch_size; ++i) {
    NllSample sample;
    sample.logprobs = DenseMatrix(steps, vocab);
    for (std::size_t t = 0; t < steps; ++t) {
      // Log-softmax of random logits keeps every row a valid distribution.
      double max_logit = 0.0;
      std::vector<double> logits(vocab);
      for (std::size_t v = 0; v < vocab; ++v) {
        logits[v] = rng.normal();
        max_logit = v == 0 ? logits[v] : std::max(max_logit, logits[v]);
      }
      double total = 0.0;
      for (double logit : logits) total += std::exp(logit - max_logit);
      const double lse = max_logit + std::log(total);
      for (std::size_t v = 0; v < vocab; ++v) sample.logprobs(t, v) = logits[v] - lse;

      sample.targets.push_back(rng.below(vocab));
      sample.mask.push_back(rng.uniform() < 0.8 ? 1 : 0);
    }
    batch.push_back(std::move(sample));
  }
  return batch;
}

std::vector<GradCheckReport> run_gradient_checks(std::uint64_t base_seed, double eps,
                                                 int points_per_op, double tau1, double tau2) {
  check_eps(eps);
  if (points_per_op < 1) throw std::domain_error("run_gradient_checks: need at least one point");

  std::vector<GradCheckReport> reports;
  reports.reserve(static_cast<std::size_t>(points_per_op) * 4);

  for (int p = 0; p < points_per_op; ++p) {
    const std::uint64_t seed = base_seed + 7919 * 1 + static_cast<std::uint64_t>(p);
    const AlignmentBatch batch = make_random_alignment_batch(seed, tau1, tau2);
    reports.push_back({"instance_alignment_loss", seed, eps,
                       grad_check_instance_loss(batch, eps)});
  }
  for (int p = 0; p < points_per_op; ++p) {
    const std::uint64_t seed = base_seed + 7919 * 2 + static_cast<std::uint64_t>(p);
    const TokenAlignmentInput point = make_random_token_point(seed);
    reports.push_back({"token_alignment_loss", seed, eps,
                       grad_check_token_loss(point.t_loc, point.x_loc, tau2, eps)});
  }
  for (int p = 0; p < points_per_op; ++p) {
    const std::uint64_t seed = base_seed + 7919 * 3 + static_cast<std::uint64_t>(p);
    Rng rng(seed);
    const std::size_t rows = 2 + rng.below(3);
    const std::size_t evidence_rows = 1 + rng.below(4);
    const std::size_t dim = 3 + rng.below(4);
    DenseMatrix x(rows, dim);
    DenseMatrix evidence(evidence_rows, dim);
    DenseMatrix probe(rows, dim);
    fill_normal(x, rng);
    fill_normal(evidence, rng);
    fill_normal(probe, rng);
    const CmfWeights weights = make_random_cmf_weights(rng, dim, 2 * dim);
    reports.push_back({"cmf_forward", seed, eps,
                       grad_check_cmf_probe(x, evidence, weights, probe, eps)});
  }
  for (int p = 0; p < points_per_op; ++p) {
    const std::uint64_t seed = base_seed + 7919 * 4 + static_cast<std::uint64_t>(p);
    reports.push_back({"nll_loss", seed, eps, grad_check_nll(make_random_nll_batch(seed), eps)});
  }
  return reports;
}

}  // namespace fse
