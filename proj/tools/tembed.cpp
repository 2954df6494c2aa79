#include "tembed/cli.hpp"

int main(int argc, char** argv) { return tembed::cli::run(argc, argv); }
