#pragma once

namespace specdeform::cli {

/// Exit codes: 0 success, 2 usage or input error, 3 numerical failure,
/// 4 empty result.
enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kEmpty = 4 };

/// Full command-line entry point; callable in-process.
int run(int argc, const char* const* argv);

}  // namespace specdeform::cli
