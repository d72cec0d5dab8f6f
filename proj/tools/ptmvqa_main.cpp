#include "ptmvqa/cli.hpp"

int main(int argc, char** argv) { return ptmvqa::run(argc, argv); }
