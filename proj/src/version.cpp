// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#include "svr/version.hpp"

#ifndef SVR_GIT_REV
#define SVR_GIT_REV "unknown"
#endif

namespace svr {

const char* build_id() { return "sparseview-0.1.0+" SVR_GIT_REV; }

} // namespace svr
