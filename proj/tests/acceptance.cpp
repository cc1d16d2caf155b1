// Runs every verification suite at its default settings and prints one
// PASS/FAIL line per acceptance criterion (details indented below it).

#include <iostream>

#include "art/harness.hpp"

using namespace art;

int main() {
    bool all = true;
    std::vector<std::string> lines;
    for (const auto& name : suite_names()) {
        auto cfg = default_config(name);
        cfg.out_dir = "acceptance_results";
        SuiteResult r;
        try {
            r = run_suite(cfg);
        } catch (const std::exception& e) {
            r.criterion.id = suite_criterion(name);
            r.criterion.suite = name;
            r.criterion.pass = false;
            r.criterion.summary = std::string("error: ") + e.what();
        }
        const auto& c = r.criterion;
        std::cout << "criterion " << c.id << " [" << name << "]: " << (c.pass ? "PASS" : "FAIL") << " - "
                  << c.summary << " (" << r.wall_sec << " s)\n";
        for (const auto& line : c.checks) std::cout << "      " << line << '\n';
        std::cout.flush();
        lines.push_back("criterion " + std::to_string(c.id) + ": " + (c.pass ? "PASS" : "FAIL"));
        all = all && c.pass;
    }
    std::cout << "\nsummary\n";
    for (const auto& l : lines) std::cout << l << '\n';
    return all ? 0 : 1;
}
