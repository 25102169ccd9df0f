#include "lsnell/cli_run.hpp"

int main(int argc, char** argv) { return lsnell::run_cli(argc, argv); }
