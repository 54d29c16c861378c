#include "caliblab/cli.hpp"

int main(int argc, char** argv) { return caliblab::cli::run(argc, argv); }
