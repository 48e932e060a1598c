#include "fca/cli.hpp"

int main(int argc, char** argv) { return fca::run_cli(argc, argv); }
