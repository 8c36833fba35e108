// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "wsym/fields.hpp"
#include "wsym/local_solvers.hpp"

namespace wsym {

/// Element-local superconvergent recovery u* in vector P^{k+2}:
///   (grad u*, grad w)_K = (A sigma_h + rho_h, grad w)_K   for w in the
///                         L2-orthogonal complement of P^k in P^{k+2},
///   (u*, v)_K = (u_h, v)_K                                for v in vector P^k.
PostField postprocess_local(const FieldSolution& field,
                            const LocalSolverCache& cache, const Mesh& mesh,
                            int threads = 1);

}  // namespace wsym
