#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace nilm::cli {

/// Runs one command line (without the program name). Normal output goes to
/// `out`; a failure is written to `err` as a single JSON object and the
/// return value is nonzero. Returns 0 on success.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Run directory name: the command plus a hash of its effective flags, so
/// repeating a run lands in the same place.
std::string run_id(std::string_view command, const std::map<std::string, std::string>& flags);

/// Default location of the published F-measure table.
std::filesystem::path default_reference_path();

}  // namespace nilm::cli
