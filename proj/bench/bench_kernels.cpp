// Benchmark comparing the serial reference kernels against the OpenMP
// variants, and verifying on the way that both produce identical bytes.
//
//   ./bench_kernels [size ...]     default sizes: 64 128 256 384

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kernels.hpp"
#include "rng.hpp"

using clock_type = std::chrono::steady_clock;

namespace {

double seconds_of(const std::function<void()>& fn, int reps) {
  const auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> sizes;
  for (int i = 1; i < argc; ++i) sizes.push_back(std::atoi(argv[i]));
  if (sizes.empty()) sizes = {64, 128, 256, 384};

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("%-10s %-10s %12s %12s %9s %s\n", "kernel", "size", "serial(ms)", "parallel(ms)",
              "speedup", "bitwise");

  prism::Rng rng(7);
  for (int n : sizes) {
    std::vector<double> a(static_cast<size_t>(n) * n), b(a.size()), c_serial(a.size()),
        c_par(a.size());
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    const int reps = n <= 128 ? 20 : 5;

    struct Variant {
      const char* name;
      void (*serial)(const double*, const double*, double*, int, int, int, bool);
      void (*parallel)(const double*, const double*, double*, int, int, int, bool);
    };
    const Variant variants[] = {
        {"gemm_nn", prism::kernels::serial::gemm_nn, prism::kernels::gemm_nn},
        {"gemm_nt", prism::kernels::serial::gemm_nt, prism::kernels::gemm_nt},
        {"gemm_tn", prism::kernels::serial::gemm_tn, prism::kernels::gemm_tn},
    };
    for (const Variant& v : variants) {
      const double ts = seconds_of(
          [&] { v.serial(a.data(), b.data(), c_serial.data(), n, n, n, false); }, reps);
      const double tp =
          seconds_of([&] { v.parallel(a.data(), b.data(), c_par.data(), n, n, n, false); }, reps);
      const bool same =
          std::memcmp(c_serial.data(), c_par.data(), sizeof(double) * c_serial.size()) == 0;
      std::printf("%-10s %-10d %12.3f %12.3f %8.2fx %s\n", v.name, n, ts * 1e3, tp * 1e3,
                  ts / tp, same ? "ok" : "MISMATCH");
      if (!same) return 1;
    }
  }
  return 0;
}
