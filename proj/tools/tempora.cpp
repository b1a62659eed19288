#include "tempora/cli.hpp"

int main(int argc, char** argv) { return tempora::run_cli(argc, argv); }
