#include "slelab/cli.hpp"

int main(int argc, char** argv) { return slelab::cli::run(argc, argv); }
