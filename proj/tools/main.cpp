#include "curriculum/commands.hpp"

int main(int argc, char** argv) { return curriculum::cli::run_cli(argc, argv); }
