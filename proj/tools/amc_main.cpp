#include "amc/harness.hpp"

int main(int argc, char** argv) { return amc::run_cli(argc, argv); }
