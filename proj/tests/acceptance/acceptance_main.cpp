// Acceptance suite: one pass/fail line per criterion.
// Usage: acceptance [criterion...]; no arguments runs all eight.

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace acceptance {
bool criterion1();
bool criterion2();
bool criterion3();
bool criterion4();
bool criterion5();
bool criterion6();
bool criterion7();
bool criterion8();
} // namespace acceptance

int main(int argc, char** argv) {
    using Fn = bool (*)();
    struct Entry {
        int id;
        const char* label;
        Fn fn;
    };
    const std::vector<Entry> entries = {
        {1, "gradient oracle (finite differences)", acceptance::criterion1},
        {2, "softmin weight suite", acceptance::criterion2},
        {3, "performance-bound sweep (finite horizon)", acceptance::criterion3},
        {4, "return-gap lower-bound sweep", acceptance::criterion4},
        {5, "ensemble model learning", acceptance::criterion5},
        {6, "pendulum learning-curve ordering", acceptance::criterion6},
        {7, "valve-toy protocol run", acceptance::criterion7},
        {8, "determinism and accounting", acceptance::criterion8},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::stoi(argv[i]));
    bool all_ok = true;
    for (const auto& e : entries) {
        if (!wanted.empty() &&
            std::find(wanted.begin(), wanted.end(), e.id) == wanted.end())
            continue;
        bool ok = false;
        try {
            ok = e.fn();
        } catch (const std::exception& ex) {
            std::printf("  exception: %s\n", ex.what());
            ok = false;
        }
        std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", e.id, e.label);
        std::fflush(stdout);
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
