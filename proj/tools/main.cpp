#include "mtlpose/cli.hpp"

int main(int argc, char** argv) { return mtlpose::run_cli(argc, argv); }
