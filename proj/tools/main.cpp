#include "scenequal/cli.hpp"

int main(int argc, char** argv) { return scenequal::run_cli(argc, argv); }
