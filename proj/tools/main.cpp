#include "cli.hpp"

int main(int argc, char** argv) { return vgot::cli::run(argc, argv); }
