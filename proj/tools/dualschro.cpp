#include "dualschro/cli.hpp"

int main(int argc, char** argv) { return dualschro::cli::run(argc, argv); }
