#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "formlab/solver.hpp"

using namespace formlab;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& body) {
  // median of five
  std::vector<double> samples;
  for (int i = 0; i < 5; ++i) {
    auto t0 = Clock::now();
    body();
    samples.push_back(
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  return samples[2];
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool match) {
  std::printf("%-22s  serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n",
              kernel, serial_ms, parallel_ms, serial_ms / parallel_ms,
              match ? "results match" : "RESULTS DIFFER");
}

}  // namespace

int main() {
  std::printf("threads: %d\n\n", par::thread_count());

  {
    Mesh m = Mesh::uniform(0.0, 30.0, 1 << 21, Weight::flat());
    auto f = [](double x) { return std::exp(std::cos(x)) * x; };
    double rs = 0.0, rp = 0.0;
    double ts = time_ms([&] { rs = integrate(m, f, par::Exec::serial); });
    double tp = time_ms([&] { rp = integrate(m, f, par::Exec::parallel); });
    report("integrate", ts, tp, rs == rp);
  }

  {
    ExampleSpec hardy = catalog("hardy", {{"n", 3}, {"c", 0.16}});
    Mesh m = Mesh::graded(0.01, 100.0, 16000, hardy.weight, 1.05);
    Potential smooth = mollify(hardy.potential, MollifierSpec{0.004}, 0.005, 101.0,
                               hardy.weight);
    std::vector<double> rs, rp;
    double ts = time_ms([&] { rs = pair_with_hats(smooth, m, par::Exec::serial); });
    double tp = time_ms([&] { rp = pair_with_hats(smooth, m, par::Exec::parallel); });
    report("mollified pairing", ts, tp, rs == rp);
  }

  {
    ExampleSpec osc = catalog("radial_oscillating");
    Mesh m = Mesh::uniform(osc.domain_a, osc.domain_b, 200000, osc.weight);
    linalg::SymTridiag ks, kp;
    double ts = time_ms([&] {
      ks = assemble(m, EllipticCoeff::unit(), osc.potential, par::Exec::serial).potential;
    });
    double tp = time_ms([&] {
      kp = assemble(m, EllipticCoeff::unit(), osc.potential, par::Exec::parallel).potential;
    });
    bool match = ks.diag == kp.diag && ks.off == kp.off;
    report("assemble", ts, tp, match);
  }

  {
    Mesh m = Mesh::uniform(0.05, 20.0, 400000, Weight::radial(3));
    Field u = Field::sample(m, [](double r) { return std::exp(std::cos(r)); });
    Field h = Field::sample(m, [](double r) {
      double t = (r - 0.05) / 19.95;
      return t * (1.0 - t);
    });
    h.values.front() = h.values.back() = 0.0;
    Potential sigma = catalog("radial_oscillating").potential;
    double rs = 0.0, rp = 0.0;
    double ts = time_ms([&] { rs = pair_with_square(sigma, h, par::Exec::serial); });
    double tp = time_ms([&] { rp = pair_with_square(sigma, h, par::Exec::parallel); });
    report("distribution pairing", ts, tp, rs == rp);
    (void)u;
  }

  return 0;
}
