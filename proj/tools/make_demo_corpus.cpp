// Writes a small procedural corpus (benign bags + raw threat scans) for trying the CLI.

#include <cstdlib>
#include <iostream>
#include <string>

#include "fixtures.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_demo_corpus <out_dir> [n_benign=12] [n_per_class=4] [seed=1]\n";
    return 2;
  }
  const int n_benign = argc > 2 ? std::atoi(argv[2]) : 12;
  const int n_per_class = argc > 3 ? std::atoi(argv[3]) : 4;
  const auto seed = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 1ull;
  try {
    tipgen::fixtures::write_corpus(argv[1], n_benign, n_per_class, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << argv[1] << "/benign and " << argv[1] << "/threats\n";
  return 0;
}
