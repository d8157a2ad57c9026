#pragma once

// Command-line front end: synth, train, denoise, eval, ablate.

namespace candid::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int run(int argc, const char* const* argv);

}  // namespace candid::cli
