#include "dtdml/cli.hpp"

int main(int argc, char** argv) { return dtdml::cli_main(argc, argv); }
