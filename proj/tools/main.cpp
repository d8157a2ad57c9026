#include "cli.hpp"

int main(int argc, char** argv) { return candid::cli::run(argc, argv); }
