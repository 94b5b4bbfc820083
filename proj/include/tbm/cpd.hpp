#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tbm/system_model.hpp"
#include "tbm/tensor.hpp"

namespace tbm {

struct SolverOptions {
  enum class Init { random, svd, genie, provided };

  int max_iters = 100;
  double grad_tol = 1e-9;        // on ||J^H r|| relative to ||y||^2
  double rel_residual_tol = 1e-14;  // relative change of the objective
  int cg_max_iters = 25;
  double lambda_scale = 1e-4;    // LM damping init: lambda = scale * residual / (T*N)
  Init init = Init::random;
  std::uint64_t seed = 0;        // random init stream
  const FactorSet* init_factors = nullptr;  // used when init == provided
  bool keep_trace = false;

  void validate() const;
};

struct TraceRow {
  int iter;
  double residual;
  double grad_norm;
};

struct CpdResult {
  FactorSet factors;  // ||z_{i,k}||^2 = T_i for data modes, scale pushed to h
  double residual = 0.0;  // ||y - sum_k rank1||^2 at the returned factors
  int iterations = 0;
  bool converged = false;
  bool infeasible_rank = false;  // Ka exceeded an unfolding's column budget
  std::vector<TraceRow> trace;
};

/// Per-user permutation and phase alignment of an estimate against the
/// truth, for scoring. Phases are applied so Im(x_{i,k}^H z_{i,k}) = 0 and
/// Re >= 0 on data modes, with the inverse phase pushed into h so the
/// rank-1 products are unchanged.
struct Alignment {
  std::vector<Eigen::Index> permutation;  // truth user k -> estimate column
  std::vector<std::vector<double>> phase;  // phase[i][k] applied to mode i
  FactorSet aligned;                       // estimate after permutation+phase
  std::vector<std::vector<double>> mse;    // mse[i][k], data modes only
};

/// Rank-Ka least-squares tensor approximation of y (last tensor mode is the
/// antenna mode). Inexact Gauss-Newton: CG on the damped normal equations,
/// step acceptance with Levenberg-Marquardt lambda control, ALS sweeps when
/// GN stalls.
CpdResult solve_cpd(const CTensor& y, Eigen::Index Ka, const SolverOptions& opts,
                    const FactorSet* truth = nullptr);

Alignment align_to_truth(const CpdResult& est, const FactorSet& truth);

/// Single-trial (1/T_i) ||z_aligned - x||^2 (i, k are 0-based).
double empirical_mse(const Alignment& aligned, int i, Eigen::Index k);

/// sum_k rank1(factors of user k); shared by the solver and the tests.
CTensor model_tensor(const FactorSet& f);

void write_trace_csv(const CpdResult& res, const std::string& path);

}  // namespace tbm
