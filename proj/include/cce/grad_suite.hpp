#pragma once

#include <string>
#include <vector>

#include "cce/grad_check.hpp"

namespace cce {

struct SuiteEntry {
    std::string component;
    GradCheckReport report;
};

struct GradSuiteOptions {
    GradCheckOptions check;
    // Negates the first parameterised layer's analytic gradient in every check.
    bool mutate = false;
    std::size_t resolution = 16;  // full (stage-2) resolution of the model checks
    std::uint64_t seed = 7;
};

// One gradient check per layer type, plus the masked reconstruction loss on
// the default context encoder, both adversarial losses, the joint loss and
// the two cascade losses.
std::vector<SuiteEntry> run_grad_suite(const GradSuiteOptions& options);

}  // namespace cce
