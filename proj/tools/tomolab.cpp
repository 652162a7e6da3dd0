#include "tomolab/cli.hpp"

int main(int argc, char** argv) { return tomolab::cli_dispatch(argc, argv); }
