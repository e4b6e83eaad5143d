#pragma once

#include <functional>
#include <string>
#include <vector>

namespace mcplan::acceptance {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int number;
  std::string name;
  std::function<Outcome(bool full)> run;
};

const std::vector<Criterion>& all_criteria();

}  // namespace mcplan::acceptance
