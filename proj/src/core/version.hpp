#pragma once

namespace spmkd {

const char* version_string();

}  // namespace spmkd
