#include <iostream>

#include "glmh/cli.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || std::string(argv[1]) == "-help" || std::string(argv[1]) == "--help") {
    std::cout << glmh::usage();
    return argc < 2 ? 2 : 0;
  }
  try {
    const glmh::RunConfig cfg = glmh::parse_cli(argc, argv);
    return glmh::run_batch(cfg).exit_code();
  } catch (const glmh::CliError& e) {
    std::cerr << e.what() << "\n\n" << glmh::usage();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "glmh: " << e.what() << '\n';
    return 1;
  }
}
