#pragma once

#include <string>
#include <vector>

namespace carnot {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double budget_seconds = 0.0;
};

// Criteria 1..8; an empty selection runs all of them.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& only = {});

CriterionResult acceptance_criterion(int id);

}  // namespace carnot
