#include "aiclab/cli/runner.hpp"

int main(int argc, char** argv) { return aiclab::cli::run_cli(argc, argv); }
