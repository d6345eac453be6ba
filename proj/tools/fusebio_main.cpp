#include "fusebio/cli.hpp"

int main(int argc, char** argv) { return fusebio::run_cli(argc, argv); }
