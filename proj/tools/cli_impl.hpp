#pragma once

namespace co2 {

// Full command-line surface: compress | bench | diag | sinkhorn. Returns the
// process exit status: 0 success, 1 numerical failure, 2 usage error.
int cli_main(int argc, char** argv);

}  // namespace co2
