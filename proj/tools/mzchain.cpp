#include "mzchain/cli.hpp"

int main(int argc, char** argv) { return mzchain::cli::run(argc, argv); }
