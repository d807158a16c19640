#include "ktrace/cli.h"

int main(int argc, char** argv) { return ktrace::run_cli(argc, argv); }
