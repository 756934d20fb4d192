#include "cli.hpp"

int main(int argc, char** argv) { return spatconf::cli_entry(argc, argv); }
