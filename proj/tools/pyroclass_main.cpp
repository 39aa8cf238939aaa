#include "pyroclass/cli.hpp"

int main(int argc, char** argv) { return pyroclass::cli::run(argc, argv); }
