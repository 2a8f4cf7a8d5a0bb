#include "caz/cli.hpp"

int main(int argc, char** argv) { return caz::cli::main_entry(argc, argv); }
