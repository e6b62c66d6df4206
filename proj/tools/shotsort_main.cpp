#include "shotsort/cli.hpp"

int main(int argc, char** argv) { return shotsort::cli::run(argc, argv); }
