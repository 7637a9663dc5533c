#pragma once

/** @file afttest.hpp
 *  Convenience umbrella: the full accelerated-failure-time fitting and
 *  model-checking toolkit.
 */

#include "data.hpp"
#include "dfsane.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "formula.hpp"
#include "gof.hpp"
#include "report.hpp"
#include "residual_process.hpp"
#include "rng.hpp"
#include "simulation.hpp"
#include "types.hpp"
