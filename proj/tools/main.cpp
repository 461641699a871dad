#include "cli_impl.hpp"

int main(int argc, char** argv) { return co2::cli_main(argc, argv); }
