#include <opinionlab/cli.hpp>

int main(int argc, char** argv) { return opinionlab::cli::run(argc, argv); }
