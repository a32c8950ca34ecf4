// Estimate the invariant density and the map of x -> (27/11) x mod 1 from a
// noiseless orbit and print both errors.

#include <cstdio>

#include "dynest/dynest.hpp"

int main() {
  using namespace dynest;
  const auto sys = beta_map(27.0 / 11.0);
  const auto kernel = make_epanechnikov();
  const auto traj = generate_trajectory(sys, 50000, NoiseLaw::none(), RngState(42));
  const auto grid = estimate_on_grid(traj, kernel, 0.007, make_grid(sys.domain(), 200), &sys);
  std::printf("AMEf %.5f\n", ame(grid.f_hat, grid.f_true));
  std::printf("AMET %.5f\n", ame(grid.t_hat, grid.t_true));
  for (std::size_t i = 0; i < grid.size(); i += 40) {
    std::printf("x=%.4f  f=%.4f  f_hat=%.4f  T=%.4f  T_hat=%.4f\n", grid.points[i][0], grid.f_true[i], grid.f_hat[i],
                grid.t_true[i], grid.t_hat[i]);
  }
}
