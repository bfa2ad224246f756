#include "soliton/cli_runner.hpp"

int main(int argc, char** argv) { return soliton::cli::main_entry(argc, argv); }
