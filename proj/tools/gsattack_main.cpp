#include "gsattack/cli.hpp"

int main(int argc, char **argv) { return gsattack::run_cli(argc, argv); }
