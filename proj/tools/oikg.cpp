#include "oikg/cli.hpp"

int main(int argc, char** argv) { return oikg::cli::run(argc, argv); }
