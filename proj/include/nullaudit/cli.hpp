#pragma once

namespace nullaudit {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitConfig = 2,
    kExitData = 3,
    kExitStatistical = 4,
    kExitReplayMismatch = 5,
};

/// Entry point of the `nullaudit` executable. Diagnostics go to stderr only.
int run_cli(int argc, char** argv);

}  // namespace nullaudit
