#pragma once

#include <string>

#include "dcplus/grid.hpp"

namespace dcplus {

/// Parses a MATPOWER case body (mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch).
/// Comments and whitespace are tolerated; powers are converted to pu on
/// baseMVA and phase-shift angles from degrees to radians. Out-of-service
/// branches are retained with in_service = false.
GridCase parse_matpower(const std::string& text);

/// Emits a case body that parse_matpower maps back to an identical GridCase
/// (full double precision).
std::string serialize_matpower(const GridCase& grid);

/// Canonical JSON dump with stable key order, for debugging and golden tests.
std::string to_json(const GridCase& grid);

}  // namespace dcplus
