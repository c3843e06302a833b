#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "promptforge/config.hpp"

namespace promptforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitBackend = 4;

struct CliEnv {
    std::ostream* out = nullptr;  // std::cout when null
    std::ostream* err = nullptr;  // std::cerr when null
    // Replaces make_transport(); lets tests count or fake transport traffic.
    std::function<std::shared_ptr<Transport>(const Config&)> transport_factory;
    // Receives the gateway counters when a subcommand finishes.
    std::function<void(const CallStats&)> on_stats;
};

// Maps an exception onto the CLI exit codes: 2 config, 3 dataset/IO,
// 4 backend (including unusable model replies).
int exit_code_for(std::exception_ptr error);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, const CliEnv& env = {});

struct CompareRow {
    std::string workflow;
    std::vector<double> scores;  // one per dataset, in [0, 1]
};

std::string compare_csv(const std::vector<std::string>& datasets, const std::vector<CompareRow>& rows);
std::string compare_text(const std::vector<std::string>& datasets, const std::vector<CompareRow>& rows);

}  // namespace promptforge
