#pragma once

// Command-line front end: gen, train, eval, bench and sweep subcommands.

#include <filesystem>
#include <string>
#include <vector>

#include "mtlpose/dataset.hpp"

namespace mtlpose {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Default output directory when --out is not given.
inline constexpr const char* kOutDirEnv = "MTLPOSE_OUT_DIR";

inline constexpr double kDefaultPrimitiveScale = 0.2;

// "kind", "kind:sampling" or a mesh file path (optionally ":sampling").
ObjectSpec parse_object(const std::string& token, double scale = kDefaultPrimitiveScale);

// train.pmd, db.pmd and test.pmd of a dataset directory.
Splits load_dataset(const std::filesystem::path& dir);

int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace mtlpose
