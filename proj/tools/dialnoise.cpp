#include "dialnoise/cli.hpp"

int main(int argc, char** argv) { return dialnoise::cli::run(argc, argv); }
