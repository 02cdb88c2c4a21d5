// Acceptance run: the twelve criteria at the reference resolution (n = 2000,
// k = 1..3, scalar checks up to k = 4). One PASS/FAIL line each; exit status
// is nonzero if any criterion fails.

#include <chrono>
#include <iostream>

#include "nodalbif/cli_report.hpp"

int main() {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    nodalbif::RunConfig cfg;
    const auto rep = nodalbif::cmd_verify(cfg);
    for (const auto& c : rep.criteria) {
        std::cout << (c.passed ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << c.detail << "\n";
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << (rep.all_passed() ? "all criteria pass" : "some criteria fail") << " in " << secs << " s\n";
    return rep.all_passed() ? 0 : 1;
}
