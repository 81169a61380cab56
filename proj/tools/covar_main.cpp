#include "covar/cli.hpp"

int main(int argc, char** argv) { return covar::cli::main(argc, argv); }
