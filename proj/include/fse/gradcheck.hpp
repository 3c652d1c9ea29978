#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fse/kernels.hpp"
#include "fse/rng.hpp"

namespace fse {

// Central finite-difference verification of the analytic gradients. Each
// checker returns max over coordinates of
//   |analytic - numeric| / max(1, |numeric|)
// with numeric = (f(x + eps e) - f(x - eps e)) / (2 eps). eps must lie in
// [1e-8, 1e-3].

double grad_check_instance_loss(const AlignmentBatch& point, double eps);

double grad_check_token_loss(const DenseMatrix& t_loc, const DenseMatrix& x_loc, double tau2,
                             double eps);

double grad_check_cmf_probe(const DenseMatrix& x, const DenseMatrix& evidence,
                            const CmfWeights& weights, const DenseMatrix& probe, double eps);

double grad_check_nll(const NllBatch& batch, double eps);

// Deterministic random test points (sizes derived from the seed).
AlignmentBatch make_random_alignment_batch(std::uint64_t seed, double tau1, double tau2);
TokenAlignmentInput make_random_token_point(std::uint64_t seed);
CmfWeights make_random_cmf_weights(Rng& rng, std::size_t d, std::size_t d_ff);
NllBatch make_random_nll_batch(std::uint64_t seed);

struct GradCheckReport {
  std::string operation;
  std::uint64_t point_seed = 0;
  double eps = 0.0;
  double max_rel_err = 0.0;
};

// Runs every gradient surface (instance loss, token loss, fusion probe, NLL)
// at points_per_op random points seeded from base_seed. Reports come back in
// operation-major order.
std::vector<GradCheckReport> run_gradient_checks(std::uint64_t base_seed, double eps,
                                                 int points_per_op, double tau1, double tau2);

}  // namespace fse
