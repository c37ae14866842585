#include "cli.hpp"

int main(int argc, char** argv) { return sibp::cli::run(argc, argv); }
