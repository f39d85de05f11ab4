#pragma once

#include <cstddef>
#include <span>

// Dense inner loops used by the autodiff ops. Each kernel has a serial
// reference form (plain nested loops, kept for tests and benchmarks) and an
// OpenMP form. The parallel forms split work only over output elements, so
// every output is accumulated in the same order regardless of thread count
// and results are bit-identical across OMP_NUM_THREADS settings.
//
// All kernels accumulate into `out` (out += ...).

namespace capsre::kernels {

enum class Exec { kSerial, kParallel };

/// Process-wide default used by the autodiff ops.
Exec default_exec();
void set_default_exec(Exec exec);

/// Threads OpenMP will use for a parallel region (1 when built without OpenMP).
int max_threads();

/// out[m x n] += a[m x k] * b[k x n]
void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> out, std::size_t m, std::size_t k,
             std::size_t n, Exec exec = default_exec());

/// out[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> out, std::size_t m, std::size_t k,
             std::size_t n, Exec exec = default_exec());

/// out[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> out, std::size_t m, std::size_t k,
             std::size_t n, Exec exec = default_exec());

/// Routing aggregate: out[j, :] += sum_i coupling[i, j] * votes[i, j, :]
/// coupling is H x E, votes H x E x d, out E x d.
void route_aggregate(std::span<const double> coupling,
                     std::span<const double> votes, std::span<double> out,
                     std::size_t h, std::size_t e, std::size_t d,
                     Exec exec = default_exec());

/// Routing agreement: out[i, j] += <votes[i, j, :], parents[j, :]>
/// votes H x E x d, parents E x d, out H x E.
void route_agreement(std::span<const double> votes,
                     std::span<const double> parents, std::span<double> out,
                     std::size_t h, std::size_t e, std::size_t d,
                     Exec exec = default_exec());

/// out[i, j, :] += weight[i, j] * rows[j, :]
/// weight H x E, rows E x d, out H x E x d.
void route_scatter(std::span<const double> weight, std::span<const double> rows,
                   std::span<double> out, std::size_t h, std::size_t e,
                   std::size_t d, Exec exec = default_exec());

}  // namespace capsre::kernels
