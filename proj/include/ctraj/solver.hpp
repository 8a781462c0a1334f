#pragma once

#include "ctraj/nlp.hpp"

// Primal-dual interior-point solver for the NlpProblem contract.  General
// inequalities are converted to equalities with slack variables; slacks and
// bounded variables get logarithmic barriers whose parameter is driven to
// zero on a monotone schedule.  Newton steps on the reduced symmetric KKT
// system are computed with a sparse LDLT factorization (dense below 300
// unknowns), with inertia-driven diagonal regularization, and accepted by a
// backtracking line search on an l1 penalty merit function.
//
// The solver never throws on non-convergence; every outcome is reported
// through SolveReport::status.  Runs are deterministic: the same problem and
// start point produce the same iterates.

namespace ctraj {

SolveReport solve(const NlpProblem& problem, const Eigen::VectorXd& x0,
                  const SolverOptions& options);

}  // namespace ctraj
