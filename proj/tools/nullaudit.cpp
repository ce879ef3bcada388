#include "nullaudit/cli.hpp"

int main(int argc, char** argv) { return nullaudit::run_cli(argc, argv); }
