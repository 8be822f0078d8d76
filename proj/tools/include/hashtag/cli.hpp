#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hashtag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// Relative paths missing from the working directory are looked up in
/// $HASHTAG_DATA_DIR, then in the bundled data directory.
std::filesystem::path resolve_data_path(const std::filesystem::path& path);

}  // namespace hashtag::cli
