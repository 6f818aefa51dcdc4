#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace scaffopt {

// Deterministic parallel sum: the index range is split into fixed-size chunks,
// each chunk accumulates serially and the chunk partials are added in chunk
// order. The result is bitwise independent of the thread count.
template <class Body>
double chunked_reduce(std::size_t n, const Body& body, std::size_t chunk = 1024) {
  if (n == 0) return 0.0;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long c = 0; c < static_cast<long long>(n_chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * chunk;
    const std::size_t end = std::min(begin + chunk, n);
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += body(i);
    partial[static_cast<std::size_t>(c)] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

template <class Body>
void parallel_for(std::size_t n, const Body& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    body(static_cast<std::size_t>(i));
  }
}

}  // namespace scaffopt
