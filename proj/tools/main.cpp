#include "finslerhj/cli.hpp"

int main(int argc, char** argv) { return finslerhj::cli::Main(argc, argv); }
