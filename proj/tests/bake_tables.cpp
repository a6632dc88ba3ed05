#include <iostream>

#include "carnot/kernels.hpp"

int main() {
    const auto& t = carnot::heisenberg_table();
    std::cout << t.config().key() << " mass " << t.mass() << " checksum " << t.checksum() << "\n";
    return 0;
}
