#include "onion_anon/cli.hpp"

int main(int argc, char** argv) { return onion_anon::cli::run(argc, argv); }
