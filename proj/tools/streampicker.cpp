// streampicker.cpp - command-line entry point.
#include <streampicker/cli.hpp>

int main(int argc, char** argv) { return streampicker::cli::run(argc, argv); }
