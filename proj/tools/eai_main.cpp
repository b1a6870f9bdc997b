#include "eai/cli.hpp"

int main(int argc, char** argv) { return eai::cli::run(argc, argv); }
