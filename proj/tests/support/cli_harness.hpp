#pragma once

#include "cli/commands.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace glint::testing {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "glint");
    std::ostringstream out, err;
    CliResult r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

inline std::filesystem::path write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << doc.dump(2) << "\n";
    return path;
}

}  // namespace glint::testing
