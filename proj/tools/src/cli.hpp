#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chunkrag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
/// Machine output goes to `out`, logs and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chunkrag::cli
