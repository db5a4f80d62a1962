#include "ssrlab/cli.hpp"

int main(int argc, char** argv) { return ssrlab::cli::main_entry(argc, argv); }
