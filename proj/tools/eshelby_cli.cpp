#include "eshelby/cli.hpp"

int main(int argc, char** argv) { return eshelby::run(argc, argv); }
