#include "tracealign/cli.hpp"

int main(int argc, char** argv) { return tracealign::run_cli(argc, argv); }
