#include <iostream>

#include "ppt/flops.hpp"

int main() {
  ppt::CompressionSchedule s;
  s.stages = {{4, 50}, {7, 50}, {10, 50}};
  const auto total = ppt::model_flops(ppt::ModelConfig::deit_small(), s).total;
  std::cout << total << "\n";
  return total == 2931247104ULL ? 0 : 1;
}
