#pragma once

// Placeholder; filled in once the library modules exist.

namespace topokit::cli {

inline int run(int, char**) { return 0; }

}  // namespace topokit::cli
