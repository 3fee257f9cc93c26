#include "thinflow/harness.hpp"

int main(int argc, char** argv) { return thinflow::cli_main(argc, argv); }
