#pragma once

namespace smoke {

const char* version();

}  // namespace smoke
