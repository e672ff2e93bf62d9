#include "dosegp/cli.hpp"

int main(int argc, char** argv) { return dosegp::cli_main(argc, argv); }
