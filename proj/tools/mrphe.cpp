#include "mrphe/cli.hpp"

int main(int argc, char** argv) { return mrphe::run_cli(argc, argv); }
