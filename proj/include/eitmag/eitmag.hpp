#pragma once

#include "eitmag/core.hpp"
#include "eitmag/field_model.hpp"
#include "eitmag/eit_optics.hpp"
#include "eitmag/stack_sim.hpp"
#include "eitmag/recon.hpp"
#include "eitmag/stackio.hpp"
#include "eitmag/config.hpp"
