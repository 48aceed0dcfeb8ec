#include "cli.hpp"

int main(int argc, char** argv) { return blinkkit::cli::run(argc, argv); }
