#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spoofbreak/nets/layers.hpp"
#include "spoofbreak/rng.hpp"

namespace testutil {

// Central finite differences against analytic gradients over a registry's
// parameters. loss() must populate gradients as a side effect of being called
// once up front; subsequent probe evaluations only need the value.
struct FdReport {
  double max_rel = 0;
  long checked = 0;
};

// floor turns the comparison into a mixed absolute/relative check: asserting
// rel < tol means |a - fd| < tol * max(|a|, |fd|, floor), so coordinates whose
// gradients sit below the difference-quotient roundoff noise (~eps*|L|/h) are
// held to an absolute bound instead of an unresolvable relative one.
inline double rel_err(double a, double fd, double floor = 1e-10) {
  const double scale = std::max({std::abs(a), std::abs(fd), floor});
  return std::abs(a - fd) / scale;
}

inline FdReport fd_check_registry(spoofbreak::nets::ParamRegistry<double>& reg,
                                  const std::function<double()>& loss_value,
                                  const std::vector<double>& analytic,
                                  double h, long max_coords,
                                  spoofbreak::Rng& rng, double floor = 1e-10) {
  std::vector<double> theta = reg.gather_params();
  const long n = static_cast<long>(theta.size());
  std::vector<long> coords;
  if (max_coords >= n) {
    for (long i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (long i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<long>(rng.next_below(static_cast<uint64_t>(n))));
  }
  FdReport report;
  for (long i : coords) {
    const double saved = theta[static_cast<size_t>(i)];
    theta[static_cast<size_t>(i)] = saved + h;
    reg.scatter_params(theta);
    const double lp = loss_value();
    theta[static_cast<size_t>(i)] = saved - h;
    reg.scatter_params(theta);
    const double lm = loss_value();
    theta[static_cast<size_t>(i)] = saved;
    reg.scatter_params(theta);
    const double fd = (lp - lm) / (2 * h);
    report.max_rel = std::max(
        report.max_rel, rel_err(analytic[static_cast<size_t>(i)], fd, floor));
    ++report.checked;
  }
  return report;
}

// Scratch directory unique to a test, wiped on creation.
inline std::string scratch_dir(const std::string& name) {
  const std::string dir = "scratch/" + name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return "";
  std::string out;
  char buf[4096];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, got);
  std::fclose(f);
  return out;
}

}  // namespace testutil
