#include "haug/cli.hpp"

int main(int argc, char** argv) { return haug::cli_main(argc, argv); }
