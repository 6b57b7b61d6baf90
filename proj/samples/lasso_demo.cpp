// Solves one synthetic LASSO instance with both solvers and prints the
// iteration count and final objective of each.
#include <cstdlib>
#include <iostream>

#include "zoprox/bench.hpp"
#include "zoprox/zoprox.hpp"

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;
  const std::size_t m = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 50;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;

  const zoprox::LassoInstance inst = zoprox::gen_lasso(n, m, 1e-3, seed);
  const zoprox::ObjectiveModel model = zoprox::lasso_blackbox(inst);
  zoprox::Rng rng(zoprox::derive_seed(seed, 1));
  const zoprox::Vector x0 = rng.normal_vector(n);

  zoprox::SolverConfig config;
  const auto ip = zoprox::ipzopm(model, config, x0);
  std::cout << "ipzopm: " << ip.iterations() << " iterations, h = " << ip.h_value << ", "
            << zoprox::to_string(ip.reason) << ", " << ip.total_evals << " evals\n";

  for (double eta : zoprox::bench::kEtaGrid) {
    config.zopg_stepsize = zoprox::schedules::constant(eta);
    const auto zo = zoprox::zopg(model, config, x0);
    std::cout << "zopg eta=" << eta << ": " << zo.iterations() << " iterations, h = " << zo.h_value
              << ", " << zoprox::to_string(zo.reason) << '\n';
  }
}
