#include "edmpose/cli.hpp"

int main(int argc, char** argv) { return edmpose::cli_main(argc, argv); }
