#include "nshawkes/cli.hpp"

int main(int argc, char** argv) { return nshawkes::cli::run(argc, argv); }
