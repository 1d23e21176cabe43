#pragma once

#include "eqforge/error.hpp"
#include "eqforge/format.hpp"
#include "eqforge/game.hpp"
#include "eqforge/process.hpp"
#include "eqforge/accuracy.hpp"
#include "eqforge/solver.hpp"
#include "eqforge/advisor.hpp"
#include "eqforge/scenario.hpp"
#include "eqforge/report.hpp"
