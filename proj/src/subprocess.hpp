#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dashreport::detail {

struct ProcessResult {
  int exit_code = -1;
  std::vector<std::uint8_t> out;
  std::string err;
};

// Runs argv[0] (PATH lookup) with stdout captured and stderr collected.
// Throws IoError when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv);

}  // namespace dashreport::detail
