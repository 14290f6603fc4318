#include "textshift/cli.hpp"

int main(int argc, char** argv) { return textshift::run_cli(argc, argv); }
