// Copyright contributors to the sparseview project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "svr/pipelines.hpp"
#include "svr/synth.hpp"

#include <stdexcept>
#include <string>

namespace svr {

// Raised for any config schema violation: unknown keys, wrong types, bad
// enum strings, unparsable files. Messages carry the dotted key path so the
// CLI can point at the offending entry.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Each loader starts from the struct's defaults and overwrites the keys the
// file mentions; a key outside the schema is an error, not a warning.
TrainConfig load_train_config(const std::string& path);
DistillConfig load_distill_config(const std::string& path);
FusionConfig load_fusion_config(const std::string& path);
SyntheticSceneSpec load_scene_spec(const std::string& path);

// In-memory variants used by the loaders and by nested schemas (the distill
// config embeds two train configs). `prefix` is the dotted path reported in
// errors, empty at the top level.
TrainConfig train_config_from_json_text(const std::string& text, const std::string& prefix);

} // namespace svr
