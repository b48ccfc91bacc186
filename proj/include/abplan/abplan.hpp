#pragma once

// Umbrella header for the whole library.

#include "abplan/errors.hpp"
#include "abplan/estimators.hpp"
#include "abplan/formulas.hpp"
#include "abplan/io.hpp"
#include "abplan/math.hpp"
#include "abplan/model.hpp"
#include "abplan/planner.hpp"
#include "abplan/rng.hpp"
#include "abplan/sim.hpp"
#include "abplan/utc.hpp"
