// Serves the toy rewriting prover over the line-oriented bridge protocol.
// Usage: toy_bridge <rules-file>

#include <iostream>

#include "ntp/bridge.hpp"
#include "ntp/prover.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: toy_bridge <rules-file>\n";
    return 2;
  }
  try {
    ntp::ToyProverEnv env(ntp::load_rule_file(argv[1]));
    ntp::serve_bridge(env, std::cin, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "toy_bridge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
