#include "core/version.hpp"

namespace spmkd {

const char* version_string() { return "0.1.0"; }

}  // namespace spmkd
