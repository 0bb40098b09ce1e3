#include "../src/cli/run.hpp"

int main(int argc, char** argv) { return eigendrift::cli::run(argc, argv); }
