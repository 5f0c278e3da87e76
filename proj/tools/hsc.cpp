#include "hsc/cli.hpp"

int main(int argc, char** argv) { return hsc::dispatch(argc, argv); }
