// SPDX-License-Identifier: MIT
//
// Umbrella header.

#pragma once

#include "dsg/core.hpp"
#include "dsg/model.hpp"
#include "dsg/exchangeable.hpp"
#include "dsg/gauge.hpp"
#include "dsg/riccati.hpp"
#include "dsg/equilibrium.hpp"
#include "dsg/gap.hpp"
#include "dsg/assumptions.hpp"
#include "dsg/sim.hpp"
#include "dsg/io.hpp"

namespace dsg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dsg
