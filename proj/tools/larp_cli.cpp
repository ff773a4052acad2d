#include "larp/cli.hpp"

int main(int argc, char** argv) { return larp::run_cli(argc, argv); }
