#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmf::cli {

inline constexpr const char* kToolVersion = "0.3.0";

// Exit codes
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kTolerance = 3;
inline constexpr int kDivergence = 4;

struct RunManifest {
    std::string command;
    std::string config_digest;  // fnv1a64 of the canonical config dump
    std::string tool_version = kToolVersion;
    double wall_seconds = 0.0;
    long steps = 0;
    std::vector<std::string> files;  // relative to the output directory

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& dir) const;
};

std::string config_digest(const nlohmann::json& canonical);

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace hmf::cli
