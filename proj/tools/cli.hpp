#pragma once

namespace blinkkit::cli {

/// Dispatches a blinkkit command line. Exit codes: 0 success, 1 domain error,
/// 2 usage error.
int run(int argc, char** argv);

}  // namespace blinkkit::cli
