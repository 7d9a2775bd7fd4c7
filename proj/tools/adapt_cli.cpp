#include "adapt/cli/main.hpp"

int main(int argc, char** argv) { return adapt::cli::cli_main(argc, argv); }
