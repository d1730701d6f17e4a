#include "partgraph/cli.hpp"

int main(int argc, char** argv) {
    return partgraph::run_cli(argc, argv);
}
