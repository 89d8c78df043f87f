#include "dacapo/cli.hpp"

int main(int argc, char** argv) { return dacapo::cli::cli_main(argc, argv); }
