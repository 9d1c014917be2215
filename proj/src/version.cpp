#include "smoke/version.hpp"

namespace smoke {

const char* version() { return "0.1.0"; }

}  // namespace smoke
