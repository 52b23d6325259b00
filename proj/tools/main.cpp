#include "cli.hpp"

int main(int argc, char** argv) { return mbrl::cli::run(argc, argv); }
