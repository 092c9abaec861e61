#include "rlang/cli.hpp"

int main(int argc, char** argv) { return rlang::cli::main(argc, argv); }
