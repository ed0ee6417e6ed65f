#include "nile/cli.hpp"

int main(int argc, char** argv) { return nile::cli::dispatch(argc, argv); }
