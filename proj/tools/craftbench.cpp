#include "craft/cli.hpp"

int main(int argc, char** argv) { return craft::run_cli(argc, argv); }
