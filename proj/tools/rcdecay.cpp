#include "rcdecay/cli.hpp"

int main(int argc, char** argv) { return rcdecay::cli::run_cli(argc, argv); }
