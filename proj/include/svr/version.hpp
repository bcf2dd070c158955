// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace svr {

const char* build_id();

} // namespace svr
