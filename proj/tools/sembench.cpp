#include "cli.hpp"

int main(int argc, char** argv) { return sembench::cli::parse_and_dispatch(argc, argv); }
