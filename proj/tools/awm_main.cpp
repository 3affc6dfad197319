#include "awm/cli.hpp"

int main(int argc, char** argv) { return awm::run_cli(argc, argv); }
