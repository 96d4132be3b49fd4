// Acceptance suite: one PASS/FAIL line per criterion.
// usage: lbds_acceptance <config.json> [scratch-dir] [criterion ...]

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "lbds/config.hpp"
#include "lbds/verification.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: " << argv[0] << " <config.json> [scratch-dir] [criterion ...]\n";
    return 2;
  }
  try {
    const auto cfg = lbds::load_config(argv[1]);
    lbds::VerifyOptions opt;
    opt.seed = cfg.seed;
    opt.config = &cfg;
    if (argc > 2) opt.scratch = argv[2];
    for (int k = 3; k < argc; ++k) opt.criteria.push_back(std::stoi(argv[k]));
    const auto results = lbds::run_verification(opt, &std::cout);
    std::size_t passed = 0;
    for (const auto& r : results) passed += r.pass ? 1 : 0;
    std::cout << passed << "/" << results.size() << " criteria passed\n";
    return passed == results.size() ? EXIT_SUCCESS : EXIT_FAILURE;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 2;
  }
}
