#include "cli_app.hpp"

int main(int argc, char** argv) { return peakhabit::cli::run(argc, argv); }
