#include "wkb/cli.hpp"

int main(int argc, char** argv) { return wkb::run_cli(argc, argv); }
