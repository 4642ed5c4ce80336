#include "topokit/cli.hpp"

int main(int argc, char** argv) { return topokit::cli::run(argc, argv); }
