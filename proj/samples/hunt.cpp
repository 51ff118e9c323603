// Safety period of one source under flooding, phantom and two-way routing.
#include <cstdio>

#include "ctxpriv/phantom.hpp"

using namespace ctxpriv;

int main() {
  const int g = 20;
  const auto topo = build_grid(g, g, 1.0).with_roles(grid_node(g, g - 1, g - 1), {grid_node(g, 0, 0)});
  for (const auto& s : {phantom::Strategy::flood_only(), phantom::Strategy::phantom({phantom::WalkMode::Pure, 10}),
                        phantom::Strategy::two_way(10)}) {
    SimRng rng(7, "hunt");
    const auto r = phantom::hunt(topo, s, topo.sink(), 500, rng);
    std::printf("%-8s safety_period=%d captured=%s transmissions=%zu mean_latency=%.1f\n", s.name().c_str(),
                r.safety_period, r.captured ? "yes" : "no", r.transmissions_total, r.mean_latency_hops());
  }
  const auto plan = phantom::min_zone_nodes(0.01, 3);
  std::printf("zone for P_r=0.01, H=3: %lld nodes\n", static_cast<long long>(plan.min_nodes));
}
