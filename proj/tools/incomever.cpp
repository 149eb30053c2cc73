#include <incomever/cli.hpp>

int main(int argc, char** argv) { return incv::cli::run(argc, argv); }
