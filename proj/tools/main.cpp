#include "foaground/cli.hpp"

int main(int argc, char** argv) { return foaground::run_cli(argc, argv); }
