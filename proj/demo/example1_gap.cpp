// Performance gap of the SAPDE and SWMFE strategies on Example 1
// (x' = x + u + w, cost x^2 - x*xbar + 5 xbar^2 + 5 u^2, T = 50).
//
//   ./example1_gap [models/example1.json]

#include <cstdio>
#include <string>

#include "dsg/dsg.hpp"

int main(int argc, char** argv) {
  using namespace dsg;
  const std::string path = argc > 1 ? argv[1] : "models/example1.json";
  try {
    const auto file = load_model(path);
    std::printf("%6s %14s %14s %12s\n", "n", "gap_sapde", "gap_swmfe", "n*gap_sapde");
    for (int n : {2, 5, 10, 20, 50, 100, 200, 500, 1000}) {
      const auto noise = instantiate_noise(file, n);
      const double sa = performance_gap(file.model, noise, n, NsKind::Sapde).gap[0];
      const double sw = performance_gap(file.model, noise, n, NsKind::Swmfe).gap[0];
      std::printf("%6d %14.6g %14.6g %12.6g\n", n, sa, sw, n * sa);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "example1_gap: %s\n", e.what());
    return 1;
  }
  return 0;
}
