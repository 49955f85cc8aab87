#include "cli/cli.hpp"

int main(int argc, char** argv) { return dmssn::cli::run(argc, argv); }
