// Acceptance suite: one check per shipped criterion, each printing a
// [PASS]/[FAIL] line. `--only N` runs a single criterion (the ctest entry
// points), `--full` switches the desk-scale protocols to their full-size
// counterparts where one exists (hours of runtime).

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "criteria.hpp"

int main(int argc, char** argv) {
  int only = 0;
  bool full = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--full") == 0) full = true;
    else {
      std::cerr << "usage: mcplan_acceptance [--only N] [--full]\n";
      return 2;
    }
  }

  const auto& criteria = mcplan::acceptance::all_criteria();
  int failures = 0;
  for (const auto& criterion : criteria) {
    if (only != 0 && criterion.number != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    mcplan::acceptance::Outcome outcome;
    try {
      outcome = criterion.run(full);
    } catch (const std::exception& err) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + err.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion.number
              << " (" << criterion.name << "): " << outcome.detail << " [" << secs << " s]"
              << std::endl;
    if (!outcome.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
