#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace formlab::par {

enum class Exec { serial, parallel };

/// Fills out[0..n) with f(i). Each index is written exactly once, so the
/// parallel path produces the same bits as the serial one; consumers reduce
/// the array in index order to keep results independent of thread count.
template <typename T, typename F>
void fill(Exec ex, std::size_t n, T* out, F&& f) {
#ifdef _OPENMP
  if (ex == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      out[i] = f(static_cast<std::size_t>(i));
    return;
  }
#else
  (void)ex;
#endif
  for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
}

template <typename T, typename F>
std::vector<T> map(Exec ex, std::size_t n, F&& f) {
  std::vector<T> out(n);
  fill(ex, n, out.data(), std::forward<F>(f));
  return out;
}

/// Index-order reduction.
double sum(std::span<const double> xs);

/// First maximum wins ties.
std::size_t argmax(std::span<const double> xs);

/// Worker count the parallel path would use (1 without OpenMP).
int thread_count();

}  // namespace formlab::par
