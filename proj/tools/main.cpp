#include "specdeform/cli.hpp"

int main(int argc, char** argv) { return specdeform::cli::run(argc, argv); }
