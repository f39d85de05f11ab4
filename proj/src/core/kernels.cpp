#include "capsre/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace capsre::kernels {

namespace {

std::atomic<Exec> g_default{Exec::kParallel};

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

bool go_parallel(Exec exec, std::size_t work) {
  return exec == Exec::kParallel && work >= kParallelWork;
}

}  // namespace

Exec default_exec() { return g_default.load(std::memory_order_relaxed); }

void set_default_exec(Exec exec) {
  g_default.store(exec, std::memory_order_relaxed);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(std::span<const double> a, std::span<const double> b,
             std::span<double> out, std::size_t m, std::size_t k,
             std::size_t n, Exec exec) {
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = out[i * n + j];
        for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
        out[i * n + j] = acc;
      }
    }
    return;
  }
  const bool par = go_parallel(exec, m * k * n);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(m); ++si) {
    const auto i = static_cast<std::size_t>(si);
    double* orow = out.data() + i * n;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b,
             std::span<double> out, std::size_t m, std::size_t k,
             std::size_t n, Exec exec) {
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
        out[i * n + j] += acc;
      }
    }
    return;
  }
  const bool par = go_parallel(exec, m * k * n);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(m); ++si) {
    const auto i = static_cast<std::size_t>(si);
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out[i * n + j] += acc;
    }
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b,
             std::span<double> out, std::size_t m, std::size_t k,
             std::size_t n, Exec exec) {
  if (exec == Exec::kSerial) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = out[p * n + j];
        for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
        out[p * n + j] = acc;
      }
    }
    return;
  }
  const bool par = go_parallel(exec, m * k * n);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t sp = 0; sp < static_cast<std::ptrdiff_t>(k); ++sp) {
    const auto p = static_cast<std::size_t>(sp);
    double* orow = out.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + p];
      const double* brow = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void route_aggregate(std::span<const double> coupling,
                     std::span<const double> votes, std::span<double> out,
                     std::size_t h, std::size_t e, std::size_t d, Exec exec) {
  if (exec == Exec::kSerial) {
    for (std::size_t j = 0; j < e; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        double acc = out[j * d + k];
        for (std::size_t i = 0; i < h; ++i) {
          acc += coupling[i * e + j] * votes[(i * e + j) * d + k];
        }
        out[j * d + k] = acc;
      }
    }
    return;
  }
  // Parallel over parents: each output row is owned by one thread.
  const bool par = go_parallel(exec, h * e * d) && e > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t sj = 0; sj < static_cast<std::ptrdiff_t>(e); ++sj) {
    const auto j = static_cast<std::size_t>(sj);
    double* orow = out.data() + j * d;
    for (std::size_t i = 0; i < h; ++i) {
      const double c = coupling[i * e + j];
      const double* vrow = votes.data() + (i * e + j) * d;
      for (std::size_t k = 0; k < d; ++k) orow[k] += c * vrow[k];
    }
  }
}

void route_agreement(std::span<const double> votes,
                     std::span<const double> parents, std::span<double> out,
                     std::size_t h, std::size_t e, std::size_t d, Exec exec) {
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < e; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          acc += votes[(i * e + j) * d + k] * parents[j * d + k];
        }
        out[i * e + j] += acc;
      }
    }
    return;
  }
  const bool par = go_parallel(exec, h * e * d);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(h); ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t j = 0; j < e; ++j) {
      const double* vrow = votes.data() + (i * e + j) * d;
      const double* prow = parents.data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += vrow[k] * prow[k];
      out[i * e + j] += acc;
    }
  }
}

void route_scatter(std::span<const double> weight, std::span<const double> rows,
                   std::span<double> out, std::size_t h, std::size_t e,
                   std::size_t d, Exec exec) {
  if (exec == Exec::kSerial) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < e; ++j) {
        for (std::size_t k = 0; k < d; ++k) {
          out[(i * e + j) * d + k] += weight[i * e + j] * rows[j * d + k];
        }
      }
    }
    return;
  }
  const bool par = go_parallel(exec, h * e * d);
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(h); ++si) {
    const auto i = static_cast<std::size_t>(si);
    for (std::size_t j = 0; j < e; ++j) {
      const double w = weight[i * e + j];
      double* orow = out.data() + (i * e + j) * d;
      const double* rrow = rows.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) orow[k] += w * rrow[k];
    }
  }
}

}  // namespace capsre::kernels
