#include <string>
#include <vector>

#include "ecal/cli.hpp"

int main(int argc, char** argv) {
    return ecal::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
