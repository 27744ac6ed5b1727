#include "tce/cli.hpp"

int main(int argc, char** argv) { return tce::cli_main(argc, argv); }
