#include "bcf/cli.hpp"

int main(int argc, char** argv) { return bcf::run_cli(argc, argv); }
