#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rgdet {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelftestOptions {
    /// Weights file to validate and use for the encoder checks. When unset,
    /// seeded weights are written to a temp file and read back.
    std::optional<std::string> weights_path;
};

/// Oracle and property checks at reduced sizes.
std::vector<CheckResult> run_selftest(const SelftestOptions& opts = {});

} // namespace rgdet
