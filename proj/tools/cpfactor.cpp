#include "cpfactor/io/cli.hpp"

int main(int argc, char** argv) { return cpfactor::io::run_cli(argc, argv); }
