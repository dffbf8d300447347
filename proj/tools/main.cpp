#include "cli.hpp"

int main(int argc, char** argv) { return sharpseg::run_cli(std::vector<std::string>(argv, argv + argc)); }
