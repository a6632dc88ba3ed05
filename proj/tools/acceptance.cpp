#include <cstdio>
#include <cstdlib>
#include <vector>

#include "carnot/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    bool all = true;
    for (const auto& r : carnot::run_acceptance(only)) {
        std::printf("[%s] %d %s (%.1f s): %s\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                    r.detail.c_str());
        std::fflush(stdout);
        all = all && r.pass;
    }
    return all ? 0 : 1;
}
