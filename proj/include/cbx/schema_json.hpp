#pragma once

#include <nlohmann/json_fwd.hpp>

#include "cbx/schema.hpp"

// The vendored single-header json.hpp provides the nlohmann namespace; the
// forward-declaration header ships with it.

namespace cbx {

nlohmann::json schema_to_json(const ConceptSchema& schema);
ConceptSchema schema_from_json(const nlohmann::json& j);

}  // namespace cbx
