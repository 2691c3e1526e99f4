#pragma once

// Internal JSON conversions shared by the record readers/writers.

#include <nlohmann/json.hpp>

#include "argmine/corpus.hpp"

namespace argmine {

/// Records carrying this key hold provenance only and are skipped by readers.
inline constexpr const char* kArtifactMetaKey = "artifact_meta";

nlohmann::json serialized_to_json(const SerializedThread& st);
SerializedThread serialized_from_json(const nlohmann::json& j);

}  // namespace argmine
